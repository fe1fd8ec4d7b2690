//! Hourly taxi-region transactions, frequent itemsets and functional region labels.

mod apriori;
mod windows;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::TaxiId;
use crate::regions::{EventKind, Leaf, RegionId, VisitEvent};

pub use apriori::{apriori, min_count, FrequentItemset, DEFAULT_MINSUP};
pub use windows::{default_specs, parse_slot_spec, HourKey, Label, TimeWindows, Window, SECONDS_PER_DAY};

#[derive(Debug, Error, PartialEq)]
pub enum FunctionsError {
    #[error("minsup {0} must be in (0, 1]")]
    InvalidMinsup(f64),
    #[error("invalid time windows: {0}")]
    InvalidWindows(String),
}

/// One hour's boolean visit table: a row per taxi with at least one visit, holding the
/// sorted distinct regions it visited.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransactionTable {
    pub hour: HourKey,
    pub taxis: Vec<TaxiId>,
    pub rows: Vec<Vec<RegionId>>,
}

impl TransactionTable {
    /// Builds rows from per-region visit counts (index = region id); zero rows are omitted.
    pub fn from_counts(hour: HourKey, counts: &[Vec<u32>]) -> Self {
        let mut table = TransactionTable {
            hour,
            taxis: Vec::new(),
            rows: Vec::new(),
        };
        for (i, c) in counts.iter().enumerate() {
            let row: Vec<RegionId> = c.iter().enumerate().filter(|(_, &n)| n > 0).map(|(r, _)| r as RegionId).collect();
            if !row.is_empty() {
                table.taxis.push(TaxiId::from(i as u32));
                table.rows.push(row);
            }
        }
        table
    }

    /// Region ids appearing in any row.
    pub fn items(&self) -> Vec<RegionId> {
        let set: BTreeSet<RegionId> = self.rows.iter().flatten().copied().collect();
        set.into_iter().collect()
    }

    /// Dense boolean row over regions `0..width`.
    pub fn boolean_row(&self, i: usize, width: usize) -> Vec<bool> {
        let mut row = vec![false; width];
        for &r in &self.rows[i] {
            if (r as usize) < width {
                row[r as usize] = true;
            }
        }
        row
    }

    /// Rows containing every item of `items` (sorted).
    pub fn count_containing(&self, items: &[RegionId]) -> usize {
        self.rows.iter().filter(|row| apriori::is_subset(items, row)).count()
    }
}

fn tables_from_map(map: BTreeMap<HourKey, BTreeMap<TaxiId, BTreeSet<RegionId>>>) -> BTreeMap<HourKey, TransactionTable> {
    map.into_iter()
        .map(|(hour, by_taxi)| {
            let (taxis, rows) = by_taxi.into_iter().map(|(t, s)| (t, s.into_iter().collect())).unzip();
            (hour, TransactionTable { hour, taxis, rows })
        })
        .collect()
}

/// The table for a single local hour. Only visit events count.
pub fn build_transactions(events: &[VisitEvent], hour: HourKey, utc_offset_s: i64) -> TransactionTable {
    let mut by_taxi: BTreeMap<TaxiId, BTreeSet<RegionId>> = BTreeMap::new();
    for e in events {
        if e.kind == EventKind::Visit && HourKey::from_utc(e.timestamp, utc_offset_s) == hour {
            by_taxi.entry(e.taxi.clone()).or_default().insert(e.region);
        }
    }
    let mut map = BTreeMap::new();
    map.insert(hour, by_taxi);
    tables_from_map(map).remove(&hour).expect("inserted above")
}

/// Tables for every local hour that has at least one visit.
pub fn build_hourly_tables(events: &[VisitEvent], utc_offset_s: i64) -> BTreeMap<HourKey, TransactionTable> {
    let mut map: BTreeMap<HourKey, BTreeMap<TaxiId, BTreeSet<RegionId>>> = BTreeMap::new();
    for e in events.iter().filter(|e| e.kind == EventKind::Visit) {
        map.entry(HourKey::from_utc(e.timestamp, utc_offset_s))
            .or_default()
            .entry(e.taxi.clone())
            .or_default()
            .insert(e.region);
    }
    tables_from_map(map)
}

/// How one hour's itemsets contribute to a region's window score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreRule {
    /// Largest support among the hour's frequent itemsets containing the region.
    #[default]
    MaxSupport,
    /// 1 if the region is in any frequent itemset that hour.
    FrequentHours,
}

impl FromStr for ScoreRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max_support" => Ok(ScoreRule::MaxSupport),
            "frequent_hours" => Ok(ScoreRule::FrequentHours),
            _ => Err(format!("bad score rule '{s}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionFunction {
    pub region: RegionId,
    pub label: Label,
    /// Indexed work, entertainment, home.
    pub window_scores: [f64; 3],
}

impl RegionFunction {
    pub fn score(&self, w: Window) -> f64 {
        self.window_scores[w as usize]
    }
}

/// Labels every region in `universe` (plus any region seen in an itemset) by its dominant window.
/// Hours outside every window are ignored.
pub fn classify_regions<'a, I>(hourly: I, windows: &TimeWindows, universe: &[RegionId], rule: ScoreRule) -> Vec<RegionFunction>
where
    I: IntoIterator<Item = (HourKey, &'a [FrequentItemset])>,
{
    // Per hour and region, the hour's contribution; hours sorted so float sums do not depend on input order.
    let mut per_hour: BTreeMap<HourKey, BTreeMap<RegionId, f64>> = BTreeMap::new();
    for (hour, sets) in hourly {
        let slot = per_hour.entry(hour).or_default();
        for set in sets {
            let v = match rule {
                ScoreRule::MaxSupport => set.support,
                ScoreRule::FrequentHours => 1.0,
            };
            for &r in &set.items {
                let e = slot.entry(r).or_insert(0.0);
                *e = e.max(v);
            }
        }
    }

    let mut scores: BTreeMap<RegionId, [f64; 3]> = universe.iter().map(|&r| (r, [0.0; 3])).collect();
    for (hour, regions) in &per_hour {
        let window = windows.window_of(hour);
        for (&r, &v) in regions {
            let s = scores.entry(r).or_insert([0.0; 3]);
            if let Some(w) = window {
                s[w as usize] += v;
            }
        }
    }

    scores
        .into_iter()
        .map(|(region, window_scores)| RegionFunction {
            region,
            label: dominant(&window_scores),
            window_scores,
        })
        .collect()
}

fn dominant(scores: &[f64; 3]) -> Label {
    let max = scores.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Label::Other;
    }
    let winners: Vec<Window> = Window::ALL.into_iter().filter(|&w| scores[w as usize] == max).collect();
    match winners.as_slice() {
        [w] => w.label(),
        _ => Label::Other,
    }
}

/// Itemsets per hour over all hourly tables.
pub fn mine_hourly(tables: &BTreeMap<HourKey, TransactionTable>, minsup: f64) -> Result<BTreeMap<HourKey, Vec<FrequentItemset>>, FunctionsError> {
    tables.iter().map(|(h, t)| Ok((*h, apriori(t, minsup)?))).collect()
}

pub fn write_labels<W: Write>(functions: &[RegionFunction], mut out: W) -> std::io::Result<()> {
    writeln!(out, "region_id;label;work_score;entertainment_score;home_score")?;
    for f in functions {
        let [w, e, h] = f.window_scores;
        writeln!(out, "{};{};{};{};{}", f.region, f.label, w, e, h)?;
    }
    Ok(())
}

pub fn parse_label_line(line: &str) -> Result<RegionFunction, String> {
    let f: Vec<&str> = line.split(';').map(str::trim).collect();
    if f.len() != 5 {
        return Err(format!("expected 5 fields, found {}", f.len()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad score '{s}'"));
    Ok(RegionFunction {
        region: f[0].parse().map_err(|_| format!("bad region id '{}'", f[0]))?,
        label: f[1].parse()?,
        window_scores: [num(f[2])?, num(f[3])?, num(f[4])?],
    })
}

pub fn write_itemsets<W: Write>(hourly: &BTreeMap<HourKey, Vec<FrequentItemset>>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "hour;itemset;support")?;
    for (hour, sets) in hourly {
        for s in sets {
            let items: Vec<String> = s.items.iter().map(|r| r.to_string()).collect();
            writeln!(out, "{};{};{}", hour, items.join(","), s.support)?;
        }
    }
    Ok(())
}

/// Leaf bounds with their labels, the data behind a four-colour region map.
pub fn write_label_map<W: Write>(leaves: &[Leaf], functions: &[RegionFunction], mut out: W) -> std::io::Result<()> {
    let labels: BTreeMap<RegionId, Label> = functions.iter().map(|f| (f.region, f.label)).collect();
    writeln!(out, "region_id;lat_min;lat_max;lon_min;lon_max;label")?;
    for l in leaves {
        let label = labels.get(&l.region_id).copied().unwrap_or(Label::Other);
        let b = &l.bounds;
        writeln!(out, "{};{};{};{};{};{}", l.region_id, b.lat_min, b.lat_max, b.lon_min, b.lon_max, label)?;
    }
    Ok(())
}
