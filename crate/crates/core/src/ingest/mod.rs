//! Trace ingestion: dataset adapters, the canonical `taxi;timestamp;lat;lon` line format,
//! bounds clipping and the auxiliary grid-count file.

mod adapters;
mod types;

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use types::{CityBounds, GpsPoint, GridCounts, TaxiId};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid bounds {0:?}: need lat_min < lat_max and lon_min < lon_max within WGS84 ranges")]
    InvalidBounds(CityBounds),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unknown trace format '{0}' (expected rome, sanfrancisco, beijing or canonical)")]
    UnknownFormat(String),
    #[error("the sanfrancisco format carries no taxi id in its lines; one must be supplied")]
    MissingTaxiId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Canonical,
    Rome,
    SanFrancisco,
    Beijing,
}

impl FromStr for TraceFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "canonical" => Ok(TraceFormat::Canonical),
            "rome" => Ok(TraceFormat::Rome),
            "sanfrancisco" | "san_francisco" | "sf" => Ok(TraceFormat::SanFrancisco),
            "beijing" | "tdrive" => Ok(TraceFormat::Beijing),
            _ => Err(IngestError::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for TraceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceFormat::Canonical => "canonical",
            TraceFormat::Rome => "rome",
            TraceFormat::SanFrancisco => "sanfrancisco",
            TraceFormat::Beijing => "beijing",
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParseOptions {
    /// Offset of the dataset's local clock from UTC, used by adapters whose timestamps are
    /// naive local date-times (Beijing). Rome timestamps carry their own offset.
    pub utc_offset_s: i64,
    /// Taxi id for formats that keep one taxi per file (San Francisco).
    pub taxi_id: Option<TaxiId>,
}

/// One malformed or invalid input line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

/// Outcome of parsing one source. Every input line is counted exactly once in
/// `accepted`, `duplicates` or `rejects`.
#[derive(Clone, Debug, Default)]
pub struct ParseReport {
    pub points: Vec<GpsPoint>,
    pub total_lines: usize,
    pub accepted: usize,
    pub duplicates: usize,
    pub rejects: Vec<Reject>,
}

impl ParseReport {
    /// Points rejected only because their coordinates fell outside WGS84 ranges.
    pub fn invalid_coordinate_count(&self) -> usize {
        self.rejects.iter().filter(|r| r.reason.starts_with(adapters::OUT_OF_RANGE)).count()
    }
}

/// Parses a trace source. Output is grouped by taxi (ascending [`TaxiId`] order) and
/// sorted by timestamp within each taxi. Repeated `(taxi, timestamp)` pairs keep the
/// first occurrence in file order.
pub fn parse_trace<R: BufRead>(source: R, format: TraceFormat, opts: &ParseOptions) -> Result<ParseReport, IngestError> {
    if format == TraceFormat::SanFrancisco && opts.taxi_id.is_none() {
        return Err(IngestError::MissingTaxiId);
    }
    let mut report = ParseReport::default();
    let mut seen: HashSet<(TaxiId, i64)> = HashSet::new();

    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        report.total_lines += 1;
        match adapters::parse_line(&line, format, opts) {
            Ok(point) => {
                if seen.insert((point.taxi.clone(), point.timestamp)) {
                    report.accepted += 1;
                    report.points.push(point);
                } else {
                    report.duplicates += 1;
                }
            }
            Err(reason) => report.rejects.push(Reject { line: line_no, reason }),
        }
    }

    // stable: equal keys are impossible after dedup, but keep file order regardless
    report
        .points
        .sort_by(|a, b| a.taxi.cmp(&b.taxi).then(a.timestamp.cmp(&b.timestamp)));
    Ok(report)
}

/// Keeps points inside `bounds` (closed on all edges), preserving order.
pub fn clip_to_bounds(points: &[GpsPoint], bounds: &CityBounds) -> Vec<GpsPoint> {
    points
        .iter()
        .filter(|p| bounds.contains(p.lat, p.lon))
        .cloned()
        .collect()
}

/// Merges already-sorted per-source point streams into one taxi-grouped, time-sorted stream,
/// dropping `(taxi, timestamp)` repeats across sources. Returns the number of repeats dropped.
pub fn merge_sources(sources: Vec<Vec<GpsPoint>>) -> (Vec<GpsPoint>, usize) {
    let mut all: Vec<GpsPoint> = sources.into_iter().flatten().collect();
    all.sort_by(|a, b| a.taxi.cmp(&b.taxi).then(a.timestamp.cmp(&b.timestamp)));
    let before = all.len();
    all.dedup_by(|b, a| a.taxi == b.taxi && a.timestamp == b.timestamp);
    let dropped = before - all.len();
    (all, dropped)
}

/// Splits a taxi-grouped stream into per-taxi slices.
pub fn group_by_taxi(points: &[GpsPoint]) -> Vec<&[GpsPoint]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=points.len() {
        if i == points.len() || points[i].taxi != points[start].taxi {
            if i > start {
                out.push(&points[start..i]);
            }
            start = i;
        }
    }
    out
}

pub fn format_canonical(p: &GpsPoint) -> String {
    match p.occupied {
        Some(o) => format!("{};{};{};{};{}", p.taxi, p.timestamp, p.lat, p.lon, u8::from(o)),
        None => format!("{};{};{};{}", p.taxi, p.timestamp, p.lat, p.lon),
    }
}

pub fn write_canonical<W: Write>(points: &[GpsPoint], mut out: W) -> std::io::Result<()> {
    for p in points {
        writeln!(out, "{}", format_canonical(p))?;
    }
    Ok(())
}

pub fn write_rejects<W: Write>(source: &str, rejects: &[Reject], mut out: W) -> std::io::Result<()> {
    for r in rejects {
        writeln!(out, "{};{};{}", source, r.line, r.reason)?;
    }
    Ok(())
}

/// Reads a grid-count file: a header line `lat_min;lat_max;lon_min;lon_max;rows;cols`
/// followed by `rows` lines of `cols` semicolon-separated counts, southern row first.
pub fn read_grid_counts<R: BufRead>(source: R) -> Result<GridCounts, IngestError> {
    let mut lines = source.lines();
    let header = lines
        .next()
        .ok_or_else(|| IngestError::InvalidGrid("empty grid file".into()))??;
    let fields: Vec<&str> = header.split(';').map(str::trim).collect();
    if fields.len() != 6 {
        return Err(IngestError::InvalidGrid(format!("header needs 6 fields, got {}", fields.len())));
    }
    let num = |i: usize| -> Result<f64, IngestError> {
        fields[i]
            .parse::<f64>()
            .map_err(|_| IngestError::InvalidGrid(format!("bad header field '{}'", fields[i])))
    };
    let bounds = CityBounds::new(num(0)?, num(1)?, num(2)?, num(3)?)?;
    let rows: usize = fields[4]
        .parse()
        .map_err(|_| IngestError::InvalidGrid(format!("bad row count '{}'", fields[4])))?;
    let cols: usize = fields[5]
        .parse()
        .map_err(|_| IngestError::InvalidGrid(format!("bad column count '{}'", fields[5])))?;

    let mut counts = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for cell in line.split(';') {
            let v = cell
                .trim()
                .parse::<u64>()
                .map_err(|_| IngestError::InvalidGrid(format!("line {}: bad count '{}'", i + 2, cell)))?;
            counts.push(v);
        }
    }
    GridCounts::new(bounds, rows, cols, counts)
}

pub fn write_grid_counts<W: Write>(grid: &GridCounts, mut out: W) -> std::io::Result<()> {
    let b = &grid.bounds;
    writeln!(out, "{};{};{};{};{};{}", b.lat_min, b.lat_max, b.lon_min, b.lon_max, grid.rows, grid.cols)?;
    for row in grid.counts.chunks(grid.cols) {
        let line: Vec<String> = row.iter().map(u64::to_string).collect();
        writeln!(out, "{}", line.join(";"))?;
    }
    Ok(())
}
