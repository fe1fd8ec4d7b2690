//! Visit-density region division and mapping of trips onto regions.

mod quadtree;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::ingest::{CityBounds, GridCounts, TaxiId};
use crate::trajectory::Trip;

pub use quadtree::{
    build_quadtree, format_leaf, parse_leaf, read_leaves, tree_from_leaves, write_leaves, Leaf, QuadNode, QuadTreeParams,
    RegionId, DEFAULT_MAX_DEPTH, DEFAULT_THRESHOLD_FRACTION, NE, NW, SE, SW,
};

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("point ({lat}, {lon}) lies outside the region tree")]
    OutOfBounds { lat: f64, lon: f64 },
    #[error("invalid bounds {0:?}")]
    InvalidBounds(CityBounds),
    #[error("threshold fraction {0} must be in (0, 1]")]
    InvalidThreshold(f64),
    #[error("grid shape {0}x{1} must be positive")]
    InvalidGrid(usize, usize),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("malformed region tree: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Visit,
    Departure,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Visit => "visit",
            EventKind::Departure => "departure",
        })
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "visit" => Ok(EventKind::Visit),
            "departure" => Ok(EventKind::Departure),
            _ => Err(format!("bad event kind '{s}'")),
        }
    }
}

/// A taxi entering (visit) or leaving (departure) a region at a UTC timestamp.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VisitEvent {
    pub taxi: TaxiId,
    pub region: RegionId,
    pub timestamp: i64,
    pub kind: EventKind,
}

impl VisitEvent {
    pub fn visit(taxi: impl Into<TaxiId>, region: RegionId, timestamp: i64) -> Self {
        VisitEvent {
            taxi: taxi.into(),
            region,
            timestamp,
            kind: EventKind::Visit,
        }
    }
}

/// Maps each trip to a departure at its start region and a visit at its end region.
/// Trips with an endpoint outside the tree are dropped; the second value counts them.
pub fn trips_to_events(trips: &[Trip], tree: &QuadNode) -> (Vec<VisitEvent>, usize) {
    let mut events = Vec::with_capacity(trips.len() * 2);
    let mut dropped = 0;
    for t in trips {
        let from = tree.locate(t.depart.lat, t.depart.lon);
        let to = tree.locate(t.arrive.lat, t.arrive.lon);
        match (from, to) {
            (Ok(from), Ok(to)) => {
                events.push(VisitEvent {
                    taxi: t.taxi.clone(),
                    region: from,
                    timestamp: t.depart.timestamp,
                    kind: EventKind::Departure,
                });
                events.push(VisitEvent {
                    taxi: t.taxi.clone(),
                    region: to,
                    timestamp: t.arrive.timestamp,
                    kind: EventKind::Visit,
                });
            }
            _ => dropped += 1,
        }
    }
    (events, dropped)
}

/// Index of the cell along one axis; values on an interior edge go to the upper cell,
/// the outer upper edge is closed.
fn axis_cell(v: f64, lo: f64, hi: f64, n: usize) -> usize {
    let edge = |i: usize| (lo * (n - i) as f64 + hi * i as f64) / n as f64;
    let mut idx = (((v - lo) / (hi - lo)) * n as f64).floor().clamp(0.0, (n - 1) as f64) as usize;
    while idx + 1 < n && v >= edge(idx + 1) {
        idx += 1;
    }
    while idx > 0 && v < edge(idx) {
        idx -= 1;
    }
    idx
}

/// Uniform `rows x cols` histogram of the events inside `bounds`. Returns the grid and
/// the number of events that fell outside.
pub fn grid_visit_counts(events: &[(f64, f64)], bounds: &CityBounds, rows: usize, cols: usize) -> Result<(GridCounts, usize), RegionError> {
    if rows == 0 || cols == 0 {
        return Err(RegionError::InvalidGrid(rows, cols));
    }
    let mut grid = GridCounts::zeros(*bounds, rows, cols).map_err(|_| RegionError::InvalidBounds(*bounds))?;
    let mut outside = 0;
    for &(lat, lon) in events {
        if !bounds.contains(lat, lon) {
            outside += 1;
            continue;
        }
        let r = axis_cell(lat, bounds.lat_min, bounds.lat_max, rows);
        let c = axis_cell(lon, bounds.lon_min, bounds.lon_max, cols);
        grid.counts[r * cols + c] += 1;
    }
    Ok((grid, outside))
}

pub fn format_event(e: &VisitEvent) -> String {
    format!("{};{};{};{}", e.taxi, e.region, e.timestamp, e.kind)
}

pub fn write_events<W: Write>(events: &[VisitEvent], mut out: W) -> std::io::Result<()> {
    for e in events {
        writeln!(out, "{}", format_event(e))?;
    }
    Ok(())
}

pub fn parse_event(line: &str) -> Result<VisitEvent, String> {
    let f: Vec<&str> = line.trim().split(';').collect();
    if f.len() != 4 {
        return Err(format!("expected 4 fields, got {}", f.len()));
    }
    Ok(VisitEvent {
        taxi: TaxiId::new(f[0]),
        region: f[1].parse().map_err(|_| format!("bad region id '{}'", f[1]))?,
        timestamp: f[2].parse().map_err(|_| format!("bad timestamp '{}'", f[2]))?,
        kind: f[3].parse()?,
    })
}

pub fn read_events<R: BufRead>(source: R) -> Result<Vec<VisitEvent>, RegionError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_event(&line).map_err(|reason| RegionError::Parse { line: i + 1, reason })?);
    }
    Ok(out)
}
