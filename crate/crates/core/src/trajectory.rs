//! Trajectory segmentation, stop-point detection and trip extraction.

use std::io::Write;

use crate::ingest::{GpsPoint, TaxiId};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const DEFAULT_DELTA_T_S: i64 = 30 * 60;
pub const DEFAULT_D_THRESHOLD_M: f64 = 50.0;
pub const DEFAULT_T_THRESHOLD_S: i64 = 6 * 60;

/// Gap-bounded run of one taxi's points: every consecutive gap is below the segmentation threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub taxi: TaxiId,
    pub points: Vec<GpsPoint>,
}

/// A dwell: points `first..=last` all lie within the distance threshold of `first` (the anchor).
#[derive(Clone, Debug, PartialEq)]
pub struct StopPoint {
    pub taxi: TaxiId,
    pub anchor: GpsPoint,
    pub last: GpsPoint,
    pub dwell_start: i64,
    pub dwell_end: i64,
    pub centroid_lat: f64,
    pub centroid_lon: f64,
    /// Indices into the trajectory's point list.
    pub first_index: usize,
    pub last_index: usize,
}

impl StopPoint {
    pub fn dwell_s(&self) -> i64 {
        self.dwell_end - self.dwell_start
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trip {
    pub taxi: TaxiId,
    pub depart: GpsPoint,
    pub arrive: GpsPoint,
    pub length_m: f64,
    pub duration_s: i64,
}

/// Haversine distance in meters on a sphere of radius [`EARTH_RADIUS_M`].
pub fn great_circle(p: &GpsPoint, q: &GpsPoint) -> f64 {
    haversine_m(p.lat, p.lon, q.lat, q.lon)
}

pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (phi1, phi2) = (lat1.to_radians(), lat2.to_radians());
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Splits one taxi's time-sorted points wherever a gap of `delta_t` seconds or more occurs.
pub fn segment(points: &[GpsPoint], delta_t: i64) -> Vec<Trajectory> {
    let mut out: Vec<Trajectory> = Vec::new();
    let mut current: Vec<GpsPoint> = Vec::new();
    for p in points {
        if let Some(prev) = current.last() {
            if p.timestamp - prev.timestamp >= delta_t {
                out.push(Trajectory {
                    taxi: current[0].taxi.clone(),
                    points: std::mem::take(&mut current),
                });
            }
        }
        current.push(p.clone());
    }
    if !current.is_empty() {
        out.push(Trajectory {
            taxi: current[0].taxi.clone(),
            points: current,
        });
    }
    out
}

/// Scans for dwells anchored at their first point.
///
/// From anchor `i`, the stay extends over every following point closer than
/// `d_threshold` to the anchor and stops at the first point at or beyond it. If the
/// extent covers at least `t_threshold` seconds it is a stop and scanning resumes after
/// it; otherwise scanning moves to `i + 1`. A stay running to the end of the trajectory
/// still counts.
pub fn detect_stops(traj: &Trajectory, d_threshold: f64, t_threshold: i64) -> Vec<StopPoint> {
    let pts = &traj.points;
    let mut stops = Vec::new();
    let mut i = 0;
    while i < pts.len() {
        let anchor = &pts[i];
        let mut j = i + 1;
        while j < pts.len() && great_circle(anchor, &pts[j]) < d_threshold {
            j += 1;
        }
        let last = j - 1;
        if pts[last].timestamp - anchor.timestamp >= t_threshold {
            let members = &pts[i..=last];
            let n = members.len() as f64;
            stops.push(StopPoint {
                taxi: traj.taxi.clone(),
                anchor: anchor.clone(),
                last: pts[last].clone(),
                dwell_start: anchor.timestamp,
                dwell_end: pts[last].timestamp,
                centroid_lat: members.iter().map(|p| p.lat).sum::<f64>() / n,
                centroid_lon: members.iter().map(|p| p.lon).sum::<f64>() / n,
                first_index: i,
                last_index: last,
            });
            i = last + 1;
        } else {
            i += 1;
        }
    }
    stops
}

/// Pairs consecutive stops into trips: from the last point of one stop to the first point
/// of the next.
pub fn extract_trips(traj: &Trajectory, stops: &[StopPoint]) -> Vec<Trip> {
    stops
        .windows(2)
        .map(|w| {
            let depart = w[0].last.clone();
            let arrive = w[1].anchor.clone();
            Trip {
                taxi: traj.taxi.clone(),
                length_m: great_circle(&depart, &arrive),
                duration_s: arrive.timestamp - depart.timestamp,
                depart,
                arrive,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct TripParams {
    pub delta_t: i64,
    pub d_threshold: f64,
    pub t_threshold: i64,
}

impl Default for TripParams {
    fn default() -> Self {
        TripParams {
            delta_t: DEFAULT_DELTA_T_S,
            d_threshold: DEFAULT_D_THRESHOLD_M,
            t_threshold: DEFAULT_T_THRESHOLD_S,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct TripExtraction {
    pub trajectories: usize,
    pub stops: Vec<StopPoint>,
    pub trips: Vec<Trip>,
}

/// Runs segmentation, stop detection and trip extraction for one taxi's sorted points.
pub fn process_taxi(points: &[GpsPoint], params: &TripParams) -> TripExtraction {
    let mut out = TripExtraction::default();
    for traj in segment(points, params.delta_t) {
        let stops = detect_stops(&traj, params.d_threshold, params.t_threshold);
        out.trips.extend(extract_trips(&traj, &stops));
        out.stops.extend(stops);
        out.trajectories += 1;
    }
    out
}

pub fn format_trip(t: &Trip) -> String {
    format!(
        "{};{};{};{};{};{};{};{};{}",
        t.taxi,
        t.depart.timestamp,
        t.depart.lat,
        t.depart.lon,
        t.arrive.timestamp,
        t.arrive.lat,
        t.arrive.lon,
        t.length_m,
        t.duration_s
    )
}

pub fn write_trips<W: Write>(trips: &[Trip], mut out: W) -> std::io::Result<()> {
    for t in trips {
        writeln!(out, "{}", format_trip(t))?;
    }
    Ok(())
}

/// Parses one line written by [`format_trip`].
pub fn parse_trip(line: &str) -> Result<Trip, String> {
    let f: Vec<&str> = line.trim().split(';').collect();
    if f.len() != 9 {
        return Err(format!("expected 9 fields, got {}", f.len()));
    }
    fn num<T: std::str::FromStr>(s: &str) -> Result<T, String> {
        s.parse().map_err(|_| format!("bad number '{s}'"))
    }
    let taxi = TaxiId::new(f[0]);
    let depart = GpsPoint::new(taxi.clone(), num(f[1])?, num(f[2])?, num(f[3])?);
    let arrive = GpsPoint::new(taxi.clone(), num(f[4])?, num(f[5])?, num(f[6])?);
    Ok(Trip {
        taxi,
        depart,
        arrive,
        length_m: num(f[7])?,
        duration_s: num(f[8])?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(t: i64, lat: f64, lon: f64) -> GpsPoint {
        GpsPoint::new("1", t, lat, lon)
    }

    fn traj(points: Vec<GpsPoint>) -> Trajectory {
        Trajectory {
            taxi: TaxiId::new("1"),
            points,
        }
    }

    // ~0.0018 degrees of latitude is about 200 m
    const STEP_200M: f64 = 200.0 / 111_195.0;

    #[test]
    fn haversine_reference_values() {
        let o = at(0, 0.0, 0.0);
        assert_eq!(great_circle(&o, &o), 0.0);
        let d = great_circle(&o, &at(0, 0.0, 1.0));
        assert!((d - 111_195.0).abs() < 5.0, "{d}");
    }

    #[test]
    fn segment_no_large_gap() {
        let pts: Vec<_> = (0..20).map(|i| at(i * 10, 0.0, 0.0)).collect();
        assert_eq!(segment(&pts, 1800).len(), 1);
    }

    #[test]
    fn segment_gap_exactly_threshold_splits() {
        let pts = vec![at(0, 0.0, 0.0), at(1800, 0.0, 0.0)];
        assert_eq!(segment(&pts, 1800).len(), 2);
        let pts = vec![at(0, 0.0, 0.0), at(1799, 0.0, 0.0)];
        assert_eq!(segment(&pts, 1800).len(), 1);
    }

    #[test]
    fn segment_mixed_gaps() {
        let ts = [0, 60, 2060, 2120, 4120];
        let pts: Vec<_> = ts.iter().map(|&t| at(t, 0.0, 0.0)).collect();
        let sizes: Vec<usize> = segment(&pts, 1800).iter().map(|t| t.points.len()).collect();
        assert_eq!(sizes, [2, 2, 1]);
        assert!(segment(&[], 1800).is_empty());
    }

    #[test]
    fn stationary_then_jump() {
        let mut pts: Vec<_> = (0..=10).map(|i| at(i * 60, 39.9, 116.4)).collect();
        pts.push(at(660, 39.9 + STEP_200M, 116.4));
        let stops = detect_stops(&traj(pts), 50.0, 360);
        assert_eq!(stops.len(), 1);
        assert_eq!(stops[0].dwell_s(), 600);
    }

    #[test]
    fn constant_motion_has_no_stops() {
        let step = 100.0 / 111_195.0;
        let pts: Vec<_> = (0..50).map(|i| at(i * 60, 39.9 + i as f64 * step, 116.4)).collect();
        assert!(detect_stops(&traj(pts), 50.0, 360).is_empty());
    }

    #[test]
    fn trailing_stop_counts() {
        let mut pts = vec![at(0, 39.0, 116.0)];
        pts.extend((1..=8).map(|i| at(i * 60, 39.0 + STEP_200M, 116.0)));
        let stops = detect_stops(&traj(pts), 50.0, 360);
        assert_eq!(stops.len(), 1);
        assert_eq!(stops[0].first_index, 1);
        assert_eq!(stops[0].last_index, 8);
    }

    #[test]
    fn trips_from_stop_pairs() {
        let tr = traj(vec![]);
        let stop = |start: i64, end: i64, lat: f64| StopPoint {
            taxi: TaxiId::new("1"),
            anchor: at(start, lat, 116.0),
            last: at(end, lat, 116.0),
            dwell_start: start,
            dwell_end: end,
            centroid_lat: lat,
            centroid_lon: 116.0,
            first_index: 0,
            last_index: 0,
        };
        let a = stop(0, 100, 39.0);
        let b = stop(1900, 2400, 39.01);
        let c = stop(3000, 3500, 39.02);
        let trips = extract_trips(&tr, &[a.clone(), b.clone()]);
        assert_eq!(trips.len(), 1);
        assert_eq!(trips[0].duration_s, 1800);
        assert!(extract_trips(&tr, std::slice::from_ref(&a)).is_empty());
        let trips = extract_trips(&tr, &[a, b, c]);
        assert_eq!(trips.len(), 2);
        assert!(trips[0].arrive.timestamp < trips[1].depart.timestamp);
    }

    #[test]
    fn trip_line_round_trip() {
        let t = Trip {
            taxi: TaxiId::new("1131"),
            depart: GpsPoint::new("1131", 1201947767, 39.92911, 116.44933),
            arrive: GpsPoint::new("1131", 1201950842, 39.94682, 116.44805),
            length_m: 1971.25,
            duration_s: 3075,
        };
        assert_eq!(parse_trip(&format_trip(&t)).unwrap(), t);
    }
}
