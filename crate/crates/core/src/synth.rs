//! Seeded synthetic traces with planted ground truth.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dtn::TimeRange;
use crate::functions::{HourKey, Label, TimeWindows, Window};
use crate::ingest::TaxiId;
use crate::regions::{RegionId, VisitEvent};

/// Monday 2008-02-04.
pub const MONDAY_2008_02_04: i64 = 13913;

#[derive(Clone, Debug)]
pub struct CityParams {
    pub seed: u64,
    pub taxis: u32,
    pub background_regions: u32,
    pub hotspots_per_label: u32,
    pub first_day: i64,
    pub days: i64,
    pub utc_offset_s: i64,
    /// Chance a taxi is on the road in a given hour.
    pub active_fraction: f64,
    pub visits_per_hour: u32,
    /// Chance a visit goes to one of the current window's hotspots.
    pub hotspot_prob: f64,
}

impl Default for CityParams {
    fn default() -> Self {
        CityParams {
            seed: 0,
            taxis: 200,
            background_regions: 40,
            hotspots_per_label: 2,
            first_day: MONDAY_2008_02_04,
            days: 7,
            utc_offset_s: 8 * 3600,
            active_fraction: 0.6,
            visits_per_hour: 3,
            hotspot_prob: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCity {
    pub events: Vec<VisitEvent>,
    pub region_count: u32,
    /// Planted workplace, entertainment and residential regions.
    pub planted: BTreeMap<RegionId, Label>,
}

impl SyntheticCity {
    pub fn regions(&self) -> Vec<RegionId> {
        (0..self.region_count).collect()
    }
}

/// A week of visits where office regions draw traffic in work hours, malls in
/// entertainment hours and suburbs at night. Visits are otherwise uniform over all regions.
pub fn synthetic_city(p: &CityParams, windows: &TimeWindows) -> SyntheticCity {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let region_count = p.background_regions + 3 * p.hotspots_per_label;
    let mut ids: Vec<RegionId> = (0..region_count).collect();
    ids.shuffle(&mut rng);

    let mut planted = BTreeMap::new();
    let mut hot: BTreeMap<Window, Vec<RegionId>> = BTreeMap::new();
    for (i, w) in Window::ALL.into_iter().enumerate() {
        let start = i * p.hotspots_per_label as usize;
        let regions = ids[start..start + p.hotspots_per_label as usize].to_vec();
        for &r in &regions {
            planted.insert(r, w.label());
        }
        hot.insert(w, regions);
    }

    let mut events = Vec::new();
    for day in p.first_day..p.first_day + p.days {
        for hour in 0..24u8 {
            let key = HourKey { day, hour };
            let start = key.start_utc(p.utc_offset_s);
            let hotspots = windows.window_of(&key).map(|w| hot[&w].as_slice()).unwrap_or(&[]);
            for taxi in 0..p.taxis {
                if !rng.gen_bool(p.active_fraction) {
                    continue;
                }
                for _ in 0..p.visits_per_hour {
                    let region = if !hotspots.is_empty() && rng.gen_bool(p.hotspot_prob) {
                        hotspots[rng.gen_range(0..hotspots.len())]
                    } else {
                        rng.gen_range(0..region_count)
                    };
                    events.push(VisitEvent::visit(taxi, region, start + rng.gen_range(0..3600)));
                }
            }
        }
    }
    events.sort_by(|a, b| (a.timestamp, &a.taxi, a.region).cmp(&(b.timestamp, &b.taxi, b.region)));
    SyntheticCity {
        events,
        region_count,
        planted,
    }
}

#[derive(Clone, Debug)]
pub struct DtnTraceParams {
    pub seed: u64,
    pub taxis: u32,
    pub regions: u32,
    pub hot_regions: u32,
    /// Share of taxis that habitually work the hot regions.
    pub regular_fraction: f64,
    pub regular_affinity: f64,
    pub casual_affinity: f64,
    pub min_visits: u32,
    pub max_visits: u32,
    pub active_fraction: f64,
    /// When false, the history day's habits are reshuffled across taxis.
    pub persistent: bool,
    pub eval_start: i64,
    pub window_s: i64,
}

impl Default for DtnTraceParams {
    fn default() -> Self {
        DtnTraceParams {
            seed: 0,
            taxis: 2000,
            regions: 400,
            hot_regions: 12,
            regular_fraction: 0.1,
            regular_affinity: 0.7,
            casual_affinity: 0.03,
            min_visits: 2,
            max_visits: 6,
            active_fraction: 0.8,
            persistent: true,
            // Tuesday 2008-02-05 15:00 +08
            eval_start: HourKey { day: MONDAY_2008_02_04 + 1, hour: 15 }.start_utc(8 * 3600),
            window_s: 3600,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DtnTrace {
    pub events: Vec<VisitEvent>,
    pub hot: BTreeSet<RegionId>,
    pub eval: TimeRange,
    /// The same clock hour one day earlier.
    pub history: TimeRange,
    pub regulars: BTreeSet<TaxiId>,
}

/// Two same-hour windows on consecutive days. Regular taxis favour the hot regions on both
/// days; casual taxis mostly roam the rest of the city.
pub fn dtn_trace(p: &DtnTraceParams) -> DtnTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let hot: BTreeSet<RegionId> = (0..p.hot_regions).collect();
    let n_regular = (p.taxis as f64 * p.regular_fraction).round() as usize;
    let mut order: Vec<u32> = (0..p.taxis).collect();
    order.shuffle(&mut rng);
    let eval_regular: BTreeSet<u32> = order[..n_regular].iter().copied().collect();
    let history_regular: BTreeSet<u32> = if p.persistent {
        eval_regular.clone()
    } else {
        order.shuffle(&mut rng);
        order[..n_regular].iter().copied().collect()
    };

    let eval = TimeRange {
        start: p.eval_start,
        end: p.eval_start + p.window_s,
    };
    let history = TimeRange {
        start: p.eval_start - 86_400,
        end: p.eval_start - 86_400 + p.window_s,
    };

    let mut events = Vec::new();
    for (window, regular) in [(history, &history_regular), (eval, &eval_regular)] {
        for taxi in 0..p.taxis {
            if !rng.gen_bool(p.active_fraction) {
                continue;
            }
            let affinity = if regular.contains(&taxi) { p.regular_affinity } else { p.casual_affinity };
            let visits = rng.gen_range(p.min_visits..=p.max_visits);
            for _ in 0..visits {
                let region = if rng.gen_bool(affinity) {
                    rng.gen_range(0..p.hot_regions)
                } else {
                    rng.gen_range(p.hot_regions..p.regions)
                };
                events.push(VisitEvent::visit(taxi, region, window.start + rng.gen_range(0..p.window_s)));
            }
        }
    }
    events.sort_by(|a, b| (a.timestamp, &a.taxi, a.region).cmp(&(b.timestamp, &b.taxi, b.region)));
    DtnTrace {
        events,
        hot,
        eval,
        history,
        regulars: eval_regular.into_iter().map(TaxiId::from).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn city_is_deterministic() {
        let p = CityParams { taxis: 20, days: 1, ..CityParams::default() };
        let a = synthetic_city(&p, &TimeWindows::default());
        let b = synthetic_city(&p, &TimeWindows::default());
        assert_eq!(a.events, b.events);
        assert_eq!(a.planted.len(), 6);
    }

    #[test]
    fn dtn_trace_windows() {
        let p = DtnTraceParams { taxis: 100, ..DtnTraceParams::default() };
        let t = dtn_trace(&p);
        assert_eq!(t.regulars.len(), 10);
        assert!(t.events.iter().all(|e| t.eval.contains(e.timestamp) || t.history.contains(e.timestamp)));
    }
}
