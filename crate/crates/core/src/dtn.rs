//! Encounter extraction, carrier selection and publisher-to-subscriber delivery.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functions::{HourKey, Label, RegionFunction, TimeWindows};
use crate::ingest::TaxiId;
use crate::regions::{EventKind, RegionId, VisitEvent};

pub const DEFAULT_BIN_WIDTH_S: i64 = 300;

#[derive(Debug, Error, PartialEq)]
pub enum DtnError {
    #[error("bin width {0} must be positive")]
    InvalidBinWidth(i64),
    #[error("time window [{0}, {1}) is empty")]
    EmptyWindow(i64, i64),
    #[error("need {needed} taxis but only {available} are available")]
    NotEnoughTaxis { needed: usize, available: usize },
    #[error("history policy requires a history window")]
    MissingHistory,
}

/// Half-open `[start, end)` in UTC seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: i64,
    pub end: i64,
}

impl TimeRange {
    pub fn new(start: i64, end: i64) -> Result<Self, DtnError> {
        if end <= start {
            return Err(DtnError::EmptyWindow(start, end));
        }
        Ok(TimeRange { start, end })
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.start && t < self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Encounter {
    pub region: RegionId,
    pub bin_start: i64,
    /// `taxi_a < taxi_b`.
    pub taxi_a: TaxiId,
    pub taxi_b: TaxiId,
}

/// One encounter per unordered pair of taxis with a visit in the same region and time bin,
/// ordered by region, bin, then pair.
pub fn encounters(events: &[VisitEvent], bin_width: i64) -> Result<Vec<Encounter>, DtnError> {
    if bin_width <= 0 {
        return Err(DtnError::InvalidBinWidth(bin_width));
    }
    let mut cells: BTreeMap<(RegionId, i64), BTreeSet<&TaxiId>> = BTreeMap::new();
    for e in events.iter().filter(|e| e.kind == EventKind::Visit) {
        let bin = e.timestamp.div_euclid(bin_width) * bin_width;
        cells.entry((e.region, bin)).or_default().insert(&e.taxi);
    }
    let mut out = Vec::new();
    for ((region, bin_start), taxis) in cells {
        let taxis: Vec<&TaxiId> = taxis.into_iter().collect();
        for (i, a) in taxis.iter().enumerate() {
            for b in &taxis[i + 1..] {
                out.push(Encounter {
                    region,
                    bin_start,
                    taxi_a: (*a).clone(),
                    taxi_b: (*b).clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Visit events inside `window`.
pub fn events_in(events: &[VisitEvent], window: TimeRange) -> Vec<VisitEvent> {
    events.iter().filter(|e| window.contains(e.timestamp)).cloned().collect()
}

/// Taxis with at least one visit, in id order.
pub fn active_taxis(events: &[VisitEvent]) -> Vec<TaxiId> {
    let set: BTreeSet<&TaxiId> = events.iter().filter(|e| e.kind == EventKind::Visit).map(|e| &e.taxi).collect();
    set.into_iter().cloned().collect()
}

/// Hot-region visit counts for every active taxi in `window`.
pub fn hot_visit_counts(events: &[VisitEvent], window: TimeRange, hot: &BTreeSet<RegionId>) -> BTreeMap<TaxiId, usize> {
    let mut counts = BTreeMap::new();
    for e in events.iter().filter(|e| e.kind == EventKind::Visit && window.contains(e.timestamp)) {
        let c = counts.entry(e.taxi.clone()).or_insert(0);
        if hot.contains(&e.region) {
            *c += 1;
        }
    }
    counts
}

fn top_k(counts: BTreeMap<TaxiId, usize>, k: usize, exclude: &BTreeSet<TaxiId>) -> Result<Vec<TaxiId>, DtnError> {
    let mut ranked: Vec<(TaxiId, usize)> = counts.into_iter().filter(|(t, _)| !exclude.contains(t)).collect();
    if ranked.len() < k {
        return Err(DtnError::NotEnoughTaxis {
            needed: k,
            available: ranked.len(),
        });
    }
    // BTreeMap order is ascending id; the stable sort keeps it for equal counts.
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    Ok(ranked.into_iter().take(k).map(|(t, _)| t).collect())
}

/// The `k` taxis active in `eval` with the most hot-region visits there. Ties go to the smaller id.
pub fn select_oracle(events: &[VisitEvent], eval: TimeRange, hot: &BTreeSet<RegionId>, k: usize, exclude: &BTreeSet<TaxiId>) -> Result<Vec<TaxiId>, DtnError> {
    top_k(hot_visit_counts(events, eval, hot), k, exclude)
}

/// Same ranking as [`select_oracle`] but over a past window.
pub fn select_history(events: &[VisitEvent], history: TimeRange, hot: &BTreeSet<RegionId>, k: usize, exclude: &BTreeSet<TaxiId>) -> Result<Vec<TaxiId>, DtnError> {
    top_k(hot_visit_counts(events, history, hot), k, exclude)
}

/// Uniform sample of `k` taxis without replacement, in population order.
pub fn select_random(population: &[TaxiId], k: usize, seed: u64) -> Result<Vec<TaxiId>, DtnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(population, k, &mut rng)
}

fn sample_with(population: &[TaxiId], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<TaxiId>, DtnError> {
    if population.len() < k {
        return Err(DtnError::NotEnoughTaxis {
            needed: k,
            available: population.len(),
        });
    }
    let mut idx = sample(rng, population.len(), k).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| population[i].clone()).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutcome {
    pub delivered: usize,
    pub total: usize,
    /// Bin start of delivery per publisher, in the order given.
    pub delivery_times: Vec<Option<i64>>,
}

impl SimOutcome {
    pub fn delivery_ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.delivered as f64 / self.total as f64
        }
    }
}

/// Each publisher holds one message and hands it to the first subscriber it meets.
/// Encounters are processed in time order; no relaying.
pub fn propagate(publishers: &[TaxiId], subscribers: &[TaxiId], encounters: &[Encounter]) -> SimOutcome {
    let subs: HashSet<&TaxiId> = subscribers.iter().collect();
    let mut index: BTreeMap<&TaxiId, usize> = BTreeMap::new();
    for (i, p) in publishers.iter().enumerate() {
        index.entry(p).or_insert(i);
    }
    let mut order: Vec<&Encounter> = encounters.iter().collect();
    order.sort_by_key(|e| e.bin_start);

    let mut times = vec![None; publishers.len()];
    for e in order {
        for (carrier, other) in [(&e.taxi_a, &e.taxi_b), (&e.taxi_b, &e.taxi_a)] {
            if let Some(&i) = index.get(carrier) {
                if times[i].is_none() && subs.contains(other) {
                    times[i] = Some(e.bin_start);
                }
            }
        }
    }
    // Duplicate publisher entries share the first entry's fate.
    for (i, p) in publishers.iter().enumerate() {
        times[i] = times[index[p]];
    }
    SimOutcome {
        delivered: times.iter().filter(|t| t.is_some()).count(),
        total: publishers.len(),
        delivery_times: times,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Oracle,
    History,
    Random,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Oracle, Policy::History, Policy::Random];
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Oracle => "oracle",
            Policy::History => "history",
            Policy::Random => "random",
        })
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Policy::Oracle),
            "history" => Ok(Policy::History),
            "random" => Ok(Policy::Random),
            _ => Err(format!("bad policy '{s}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimScenario {
    pub name: String,
    pub eval: TimeRange,
    pub history: Option<TimeRange>,
    pub hot_regions: BTreeSet<RegionId>,
    pub publishers: usize,
    pub subscribers: usize,
    pub bin_width: i64,
    /// Keep subscribers out of the publisher candidates.
    pub disjoint: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub policy: Policy,
    pub seed: u64,
    pub outcome: SimOutcome,
}

/// Regions whose label matches the window containing `t`.
pub fn hot_regions_at(functions: &[RegionFunction], windows: &TimeWindows, t: i64, utc_offset_s: i64) -> BTreeSet<RegionId> {
    let Some(window) = windows.window_of(&HourKey::from_utc(t, utc_offset_s)) else {
        return BTreeSet::new();
    };
    functions
        .iter()
        .filter(|f| f.label != Label::Other && f.label.window() == Some(window))
        .map(|f| f.region)
        .collect()
}

/// Runs every policy for every seed. Per seed the subscribers are drawn uniformly from all
/// taxis in `events`; random publishers come from the same stream.
pub fn run_scenario(events: &[VisitEvent], scenario: &SimScenario, policies: &[Policy], seeds: &[u64]) -> Result<Vec<RunResult>, DtnError> {
    TimeRange::new(scenario.eval.start, scenario.eval.end)?;
    if policies.contains(&Policy::History) && scenario.history.is_none() {
        return Err(DtnError::MissingHistory);
    }
    let population = active_taxis(events);
    let eval_events = events_in(events, scenario.eval);
    let enc = encounters(&eval_events, scenario.bin_width)?;
    let oracle_counts = hot_visit_counts(events, scenario.eval, &scenario.hot_regions);
    let history_counts = scenario.history.map(|h| hot_visit_counts(events, h, &scenario.hot_regions));

    let mut out = Vec::new();
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let subscribers = sample_with(&population, scenario.subscribers, &mut rng)?;
        let exclude: BTreeSet<TaxiId> = if scenario.disjoint { subscribers.iter().cloned().collect() } else { BTreeSet::new() };
        for &policy in policies {
            let publishers = match policy {
                Policy::Oracle => top_k(oracle_counts.clone(), scenario.publishers, &exclude)?,
                Policy::History => top_k(history_counts.clone().expect("checked above"), scenario.publishers, &exclude)?,
                Policy::Random => {
                    let pool: Vec<TaxiId> = population.iter().filter(|t| !exclude.contains(*t)).cloned().collect();
                    let mut prng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
                    sample_with(&pool, scenario.publishers, &mut prng)?
                }
            };
            out.push(RunResult {
                policy,
                seed,
                outcome: propagate(&publishers, &subscribers, &enc),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicySummary {
    pub policy: Policy,
    pub runs: usize,
    pub mean_ratio: f64,
}

pub fn summarize(results: &[RunResult]) -> Vec<PolicySummary> {
    let mut acc: BTreeMap<Policy, (usize, f64)> = BTreeMap::new();
    for r in results {
        let e = acc.entry(r.policy).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += r.outcome.delivery_ratio();
    }
    acc.into_iter()
        .map(|(policy, (runs, sum))| PolicySummary {
            policy,
            runs,
            mean_ratio: sum / runs as f64,
        })
        .collect()
}

/// Relative improvement of history over random mean delivery ratio, when both ran.
pub fn history_improvement(summary: &[PolicySummary]) -> Option<f64> {
    let mean = |p| summary.iter().find(|s| s.policy == p).map(|s| s.mean_ratio);
    let (h, r) = (mean(Policy::History)?, mean(Policy::Random)?);
    (r > 0.0).then(|| (h - r) / r)
}

pub fn write_runs<W: Write>(results: &[RunResult], mut out: W) -> std::io::Result<()> {
    writeln!(out, "policy;seed;delivered;total;ratio")?;
    for r in results {
        let o = &r.outcome;
        writeln!(out, "{};{};{};{};{}", r.policy, r.seed, o.delivered, o.total, o.delivery_ratio())?;
    }
    Ok(())
}

pub fn write_summary<W: Write>(summary: &[PolicySummary], mut out: W) -> std::io::Result<()> {
    writeln!(out, "policy;runs;mean_ratio")?;
    for s in summary {
        writeln!(out, "{};{};{}", s.policy, s.runs, s.mean_ratio)?;
    }
    match history_improvement(summary) {
        Some(x) => writeln!(out, "history_vs_random;;{x}"),
        None => writeln!(out, "history_vs_random;;NA"),
    }
}

pub fn write_encounters<W: Write>(enc: &[Encounter], bin_width: i64, mut out: W) -> std::io::Result<()> {
    writeln!(out, "taxi_a;taxi_b;region_id;bin_start;bin_width")?;
    for e in enc {
        writeln!(out, "{};{};{};{};{}", e.taxi_a, e.taxi_b, e.region, e.bin_start, bin_width)?;
    }
    Ok(())
}
