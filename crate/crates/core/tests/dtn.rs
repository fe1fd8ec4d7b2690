use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use taxi_regions::dtn::{
    encounters, history_improvement, propagate, run_scenario, select_history, select_oracle, select_random, summarize, DtnError, Encounter, Policy,
    SimScenario, TimeRange,
};
use taxi_regions::ingest::TaxiId;
use taxi_regions::regions::{RegionId, VisitEvent};
use taxi_regions::synth::{dtn_trace, DtnTraceParams};

fn events() -> impl Strategy<Value = Vec<VisitEvent>> {
    prop::collection::vec((0u32..15, 0u32..6, 0i64..3600), 0..120)
        .prop_map(|v| v.into_iter().map(|(taxi, region, t)| VisitEvent::visit(taxi, region, 1_000_000 + t)).collect())
}

/// Pairs of events in the same region and bin, checked one pair at a time.
fn pairwise_encounters(events: &[VisitEvent], bw: i64) -> BTreeSet<(RegionId, i64, TaxiId, TaxiId)> {
    let mut out = BTreeSet::new();
    for a in events {
        for b in events {
            if a.region == b.region && a.taxi < b.taxi && a.timestamp.div_euclid(bw) == b.timestamp.div_euclid(bw) {
                out.insert((a.region, a.timestamp.div_euclid(bw) * bw, a.taxi.clone(), b.taxi.clone()));
            }
        }
    }
    out
}

/// Without relaying, a publisher's delivery time is its earliest encounter with any subscriber.
fn earliest_contact(p: &TaxiId, subs: &BTreeSet<TaxiId>, enc: &[Encounter]) -> Option<i64> {
    enc.iter()
        .filter(|e| (&e.taxi_a == p && subs.contains(&e.taxi_b)) || (&e.taxi_b == p && subs.contains(&e.taxi_a)))
        .map(|e| e.bin_start)
        .min()
}

fn ids(v: &[u32]) -> Vec<TaxiId> {
    v.iter().map(|&t| TaxiId::from(t)).collect()
}

proptest! {
    #[test]
    fn encounters_match_pairwise_scan(evs in events(), bw in prop_oneof![Just(60i64), Just(300), Just(900)]) {
        let got = encounters(&evs, bw).unwrap();
        let set: BTreeSet<_> = got.iter().map(|e| (e.region, e.bin_start, e.taxi_a.clone(), e.taxi_b.clone())).collect();
        prop_assert_eq!(set.len(), got.len());
        prop_assert_eq!(set, pairwise_encounters(&evs, bw));
        let mut sorted = got.clone();
        sorted.sort();
        prop_assert_eq!(sorted, got);
    }

    #[test]
    fn propagation_matches_earliest_contact(evs in events(), pubs in prop::collection::vec(0u32..15, 0..8), subs in prop::collection::vec(0u32..15, 0..8)) {
        let enc = encounters(&evs, 300).unwrap();
        let (pubs, subs) = (ids(&pubs), ids(&subs));
        let sub_set: BTreeSet<TaxiId> = subs.iter().cloned().collect();
        let out = propagate(&pubs, &subs, &enc);
        let expected: Vec<Option<i64>> = pubs.iter().map(|p| earliest_contact(p, &sub_set, &enc)).collect();
        prop_assert_eq!(&out.delivery_times, &expected);
        prop_assert_eq!(out.delivered, expected.iter().flatten().count());
        prop_assert_eq!(out.total, pubs.len());
    }

    #[test]
    fn removing_encounters_never_helps(evs in events(), pubs in prop::collection::vec(0u32..15, 1..8), subs in prop::collection::vec(0u32..15, 1..8), keep in prop::collection::vec(any::<bool>(), 0..400)) {
        let enc = encounters(&evs, 300).unwrap();
        let thinned: Vec<Encounter> = enc.iter().enumerate().filter(|(i, _)| keep.get(*i).copied().unwrap_or(true)).map(|(_, e)| e.clone()).collect();
        let (pubs, subs) = (ids(&pubs), ids(&subs));
        let full = propagate(&pubs, &subs, &enc);
        let less = propagate(&pubs, &subs, &thinned);
        prop_assert!(less.delivered <= full.delivered);
        for (a, b) in full.delivery_times.iter().zip(&less.delivery_times) {
            if let Some(b) = b {
                prop_assert!(a.is_some_and(|a| a <= *b));
            }
        }
    }

    #[test]
    fn relabelling_taxis_preserves_outcome(evs in events(), pubs in prop::collection::vec(0u32..15, 1..8), subs in prop::collection::vec(0u32..15, 1..8), shift in 1u32..15) {
        // a bijection on 0..15 that reverses id order for part of the range
        let relabel = |t: u32| 100 + (t + shift) % 15;
        let enc = encounters(&evs, 300).unwrap();
        let renamed: Vec<VisitEvent> = evs.iter().map(|e| VisitEvent::visit(relabel(e.taxi.as_str().parse().unwrap()), e.region, e.timestamp)).collect();
        let enc2 = encounters(&renamed, 300).unwrap();
        prop_assert_eq!(enc.len(), enc2.len());
        let a = propagate(&ids(&pubs), &ids(&subs), &enc);
        let b = propagate(&ids(&pubs.iter().map(|&t| relabel(t)).collect::<Vec<_>>()), &ids(&subs.iter().map(|&t| relabel(t)).collect::<Vec<_>>()), &enc2);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn oracle_ranks_by_count_then_id(evs in events(), hot in prop::collection::btree_set(0u32..6, 1..4), k in 1usize..6) {
        let window = TimeRange::new(1_000_000, 1_003_600).unwrap();
        let mut counts: BTreeMap<TaxiId, usize> = BTreeMap::new();
        for e in &evs {
            *counts.entry(e.taxi.clone()).or_default() += usize::from(hot.contains(&e.region));
        }
        let mut ranked: Vec<(usize, TaxiId)> = counts.into_iter().map(|(t, c)| (c, t)).collect();
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        match select_oracle(&evs, window, &hot, k, &BTreeSet::new()) {
            Ok(got) => prop_assert_eq!(got, ranked.into_iter().take(k).map(|(_, t)| t).collect::<Vec<_>>()),
            Err(e) => prop_assert_eq!(e, DtnError::NotEnoughTaxis { needed: k, available: ranked.len() }),
        }
        prop_assert_eq!(select_oracle(&evs, window, &hot, k, &BTreeSet::new()), select_history(&evs, window, &hot, k, &BTreeSet::new()));
    }
}

#[test]
fn three_taxis_in_one_cell_make_three_encounters() {
    let evs = vec![VisitEvent::visit(1u32, 4, 600), VisitEvent::visit(2u32, 4, 700), VisitEvent::visit(3u32, 4, 899), VisitEvent::visit(4u32, 4, 900)];
    let enc = encounters(&evs, 300).unwrap();
    assert_eq!(enc.len(), 3);
    assert!(enc.iter().all(|e| e.bin_start == 600));
    assert_eq!(encounters(&evs, 0).unwrap_err(), DtnError::InvalidBinWidth(0));
}

#[test]
fn saturated_subscribers_reach_every_connected_publisher() {
    let trace = dtn_trace(&DtnTraceParams { taxis: 300, ..DtnTraceParams::default() });
    let evs: Vec<VisitEvent> = trace.events.iter().filter(|e| trace.eval.contains(e.timestamp)).cloned().collect();
    let enc = encounters(&evs, 300).unwrap();
    let connected: BTreeSet<TaxiId> = enc.iter().flat_map(|e| [e.taxi_a.clone(), e.taxi_b.clone()]).collect();
    let everyone: Vec<TaxiId> = (0..300u32).map(TaxiId::from).collect();
    let out = propagate(&everyone, &everyone, &enc);
    assert_eq!(out.delivered, connected.len());
}

#[test]
fn random_selection_is_uniform() {
    let pop: Vec<TaxiId> = (0..20u32).map(TaxiId::from).collect();
    let (k, seeds) = (5, 10_000u64);
    let mut freq: BTreeMap<TaxiId, u64> = BTreeMap::new();
    for seed in 0..seeds {
        let pick = select_random(&pop, k, seed).unwrap();
        assert_eq!(pick.iter().collect::<BTreeSet<_>>().len(), k);
        for t in pick {
            *freq.entry(t).or_default() += 1;
        }
    }
    let p = k as f64 / pop.len() as f64;
    let se = (seeds as f64 * p * (1.0 - p)).sqrt();
    for (t, n) in freq {
        assert!((n as f64 - seeds as f64 * p).abs() < 3.0 * se, "{t}: {n}");
    }
    assert_eq!(select_random(&pop, 5, 9).unwrap(), select_random(&pop, 5, 9).unwrap());
    assert!(matches!(select_random(&pop, 21, 0), Err(DtnError::NotEnoughTaxis { needed: 21, available: 20 })));
}

#[test]
fn planted_regulars_are_the_oracle_picks() {
    let trace = dtn_trace(&DtnTraceParams { taxis: 500, regular_affinity: 1.0, casual_affinity: 0.0, active_fraction: 1.0, min_visits: 4, max_visits: 4, ..DtnTraceParams::default() });
    let picks = select_oracle(&trace.events, trace.eval, &trace.hot, 10, &BTreeSet::new()).unwrap();
    assert!(picks.iter().all(|t| trace.regulars.contains(t)));
    let expected: Vec<TaxiId> = trace.regulars.iter().take(10).cloned().collect();
    assert_eq!(picks, expected);
}

fn scenario(trace: &taxi_regions::synth::DtnTrace, history: TimeRange) -> SimScenario {
    SimScenario {
        name: "t".into(),
        eval: trace.eval,
        history: Some(history),
        hot_regions: trace.hot.clone(),
        publishers: 100,
        subscribers: 100,
        bin_width: 300,
        disjoint: true,
    }
}

#[test]
fn history_equal_to_eval_is_the_oracle() {
    let trace = dtn_trace(&DtnTraceParams::default());
    let seeds: Vec<u64> = (0..5).collect();
    let runs = run_scenario(&trace.events, &scenario(&trace, trace.eval), &Policy::ALL, &seeds).unwrap();
    for seed in seeds {
        let get = |p| runs.iter().find(|r| r.seed == seed && r.policy == p).unwrap().outcome.clone();
        assert_eq!(get(Policy::Oracle), get(Policy::History));
    }
    assert_eq!(runs, run_scenario(&trace.events, &scenario(&trace, trace.eval), &Policy::ALL, &(0..5).collect::<Vec<_>>()).unwrap());
}

#[test]
fn shuffled_history_is_no_better_than_random() {
    let seeds: Vec<u64> = (0..100).collect();
    let shuffled = dtn_trace(&DtnTraceParams { persistent: false, ..DtnTraceParams::default() });
    let runs = run_scenario(&shuffled.events, &scenario(&shuffled, shuffled.history), &[Policy::History, Policy::Random], &seeds).unwrap();
    let ratios = |p| runs.iter().filter(|r| r.policy == p).map(|r| r.outcome.delivery_ratio()).collect::<Vec<f64>>();
    let (h, r) = (ratios(Policy::History), ratios(Policy::Random));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    // the history set is one fixed draw of 100 publishers, so allow its binomial spread too
    let rm = mean(&r);
    let tol = 3.0 * (rm * (1.0 - rm) / 100.0 + var(&h) / 100.0 + var(&r) / 100.0).sqrt();
    assert!((mean(&h) - rm).abs() < tol, "history {} random {} tol {}", mean(&h), rm, tol);

    let persistent = dtn_trace(&DtnTraceParams::default());
    let runs = run_scenario(&persistent.events, &scenario(&persistent, persistent.history), &[Policy::History, Policy::Random], &seeds).unwrap();
    let gain = history_improvement(&summarize(&runs)).unwrap();
    assert!(mean(&h) - rm < gain * rm, "persistent habits should beat shuffled ones");
}
