use std::io::Cursor;

use proptest::prelude::*;

use taxi_regions::ingest::{
    clip_to_bounds, group_by_taxi, merge_sources, parse_trace, read_grid_counts, write_canonical, write_grid_counts, CityBounds, GpsPoint,
    GridCounts, IngestError, ParseOptions, TaxiId, TraceFormat,
};

/// Days since 1970-01-01 for a proleptic Gregorian date, by counting whole years and months.
fn days_since_epoch(y: i64, m: u32, d: u32) -> i64 {
    let leap = |y: i64| (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    let mut days = 0;
    for year in 1970..y {
        days += if leap(year) { 366 } else { 365 };
    }
    let lengths = [31, if leap(y) { 29 } else { 28 }, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
    days += lengths[..(m - 1) as usize].iter().sum::<i64>();
    days + d as i64 - 1
}

fn epoch(y: i64, mo: u32, d: u32, h: i64, mi: i64, s: i64) -> i64 {
    days_since_epoch(y, mo, d) * 86_400 + h * 3600 + mi * 60 + s
}

fn opts(offset: i64) -> ParseOptions {
    ParseOptions { utc_offset_s: offset, taxi_id: None }
}

fn point() -> impl Strategy<Value = GpsPoint> {
    (0u32..50, 0i64..2_000_000_000, -90.0f64..=90.0, -180.0f64..=180.0, prop::option::of(any::<bool>())).prop_map(|(t, ts, lat, lon, occ)| {
        let mut p = GpsPoint::new(t, ts, lat, lon);
        p.occupied = occ;
        p
    })
}

proptest! {
    #[test]
    fn canonical_round_trip(points in prop::collection::vec(point(), 0..80)) {
        let (sorted, _) = merge_sources(vec![points]);
        let mut buf = Vec::new();
        write_canonical(&sorted, &mut buf).unwrap();
        let back = parse_trace(Cursor::new(buf), TraceFormat::Canonical, &opts(0)).unwrap();
        prop_assert!(back.rejects.is_empty());
        prop_assert_eq!(back.points, sorted);
    }

    #[test]
    fn every_line_is_counted_once(lines in prop::collection::vec(prop_oneof![
        (0u32..5, 0i64..20).prop_map(|(t, s)| format!("{t};{s};39.9;116.4")),
        Just(String::new()),
        Just("1;x;39.9;116.4".to_string()),
        Just("1;5;95.0;116.4".to_string()),
        Just("1;5".to_string()),
    ], 0..100)) {
        let r = parse_trace(Cursor::new(lines.iter().map(|l| format!("{l}\n")).collect::<String>()), TraceFormat::Canonical, &opts(0)).unwrap();
        prop_assert_eq!(r.total_lines, lines.len());
        prop_assert_eq!(r.accepted + r.duplicates + r.rejects.len(), r.total_lines);
        prop_assert_eq!(r.points.len(), r.accepted);
        let out_of_range = lines.iter().filter(|l| l.contains(";95.0;")).count();
        prop_assert_eq!(r.invalid_coordinate_count(), out_of_range);
        prop_assert!(r.points.windows(2).all(|w| (&w[0].taxi, w[0].timestamp) < (&w[1].taxi, w[1].timestamp)));
        for g in group_by_taxi(&r.points) {
            prop_assert!(g.iter().all(|p| p.taxi == g[0].taxi));
        }
    }

    #[test]
    fn clipping_is_closed_on_every_edge(lat in 39.0f64..41.0, lon in 115.0f64..118.0) {
        let b = CityBounds::new(39.5, 40.5, 116.0, 117.0).unwrap();
        let kept = clip_to_bounds(&[GpsPoint::new(1u32, 0, lat, lon)], &b);
        let inside = (39.5..=40.5).contains(&lat) && (116.0..=117.0).contains(&lon);
        prop_assert_eq!(kept.len(), usize::from(inside));
    }
}

#[test]
fn beijing_lines_are_local_time() {
    let text = "1131,2008-02-02 18:22:47,116.44933,39.92911\n1131,2008-02-02 18:22:47,116.5,39.9\n1131,2008-13-02 00:00:00,116.5,39.9\n";
    let r = parse_trace(Cursor::new(text), TraceFormat::Beijing, &opts(8 * 3600)).unwrap();
    assert_eq!(r.points.len(), 1);
    assert_eq!(r.duplicates, 1);
    assert_eq!(r.rejects.len(), 1);
    assert_eq!(r.rejects[0].line, 3);
    let p = &r.points[0];
    assert_eq!(p.timestamp, epoch(2008, 2, 2, 10, 22, 47));
    assert_eq!((p.lat, p.lon), (39.92911, 116.44933));
}

#[test]
fn rome_lines_carry_their_offset() {
    let text = "156;2014-02-01 00:00:00.739166+01;POINT(41.8836718276551 12.4877775603346)\n156;2014-02-01 00:00:01.5+01;POINT(41.88 12.48 3)\n";
    let r = parse_trace(Cursor::new(text), TraceFormat::Rome, &opts(0)).unwrap();
    assert_eq!(r.points.len(), 1);
    assert_eq!(r.rejects.len(), 1);
    assert_eq!(r.points[0].timestamp, epoch(2014, 1, 31, 23, 0, 0));
    assert_eq!(r.points[0].lat, 41.8836718276551);
}

#[test]
fn san_francisco_needs_a_taxi_id() {
    let text = "37.75134 -122.39488 0 1213084687\n37.75136 -122.39527 1 1213084659\n";
    assert!(matches!(parse_trace(Cursor::new(text), TraceFormat::SanFrancisco, &opts(0)), Err(IngestError::MissingTaxiId)));
    let o = ParseOptions { utc_offset_s: 0, taxi_id: Some(TaxiId::new("abboip")) };
    let r = parse_trace(Cursor::new(text), TraceFormat::SanFrancisco, &o).unwrap();
    assert_eq!(r.points.iter().map(|p| p.timestamp).collect::<Vec<_>>(), vec![1213084659, 1213084687]);
    assert_eq!(r.points[0].occupied, Some(true));
    assert!(r.points.iter().all(|p| p.taxi.as_str() == "abboip"));
}

#[test]
fn merging_drops_cross_source_repeats() {
    let a = vec![GpsPoint::new(1u32, 10, 0.0, 0.0), GpsPoint::new(2u32, 5, 0.0, 0.0)];
    let b = vec![GpsPoint::new(1u32, 10, 1.0, 1.0), GpsPoint::new(1u32, 20, 0.0, 0.0)];
    let (merged, dropped) = merge_sources(vec![a, b]);
    assert_eq!(dropped, 1);
    assert_eq!(merged.len(), 3);
    assert_eq!(group_by_taxi(&merged).len(), 2);
}

#[test]
fn grid_file_round_trip() {
    let g = GridCounts::new(CityBounds::beijing(), 2, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
    let mut buf = Vec::new();
    write_grid_counts(&g, &mut buf).unwrap();
    assert_eq!(read_grid_counts(Cursor::new(buf)).unwrap(), g);
    assert!(read_grid_counts(Cursor::new("1;2;3;4;1;1\n")).is_err());
    assert!(GridCounts::new(CityBounds::beijing(), 2, 2, vec![1]).is_err());
}
