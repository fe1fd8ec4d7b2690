//! Staged end-to-end runs driven by one config file.
//!
//! Every stage reads its predecessors' text artifacts from the output directory, writes its
//! own with an atomic rename, and records config and file hashes in `manifest.json`.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, Cursor, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

pub use config::{
    apply_override, BoundsSpec, DtnConfig, FunctionsConfig, IngestConfig, PipelineConfig, RegionsConfig, ScenarioConfig,
    SourceConfig, StatsConfig, TreeEvents, TripsConfig, WindowsConfig,
};
pub use manifest::{derive_seed, sha256_hex, write_atomic, Manifest, StageRecord, MANIFEST};

use crate::dtn::{self, SimScenario};
use crate::functions::{self, RegionFunction};
use crate::ingest::{self, GpsPoint, ParseOptions, TaxiId, TraceFormat};
use crate::regions::{self, QuadTreeParams};
use crate::stats::{self, Model, StatsError};
use crate::trajectory::{self, StopPoint, Trip};

pub const POINTS: &str = "points.txt";
pub const REJECTS: &str = "rejects.txt";
pub const INGEST_REPORT: &str = "ingest_report.txt";
pub const TRIPS: &str = "trips.txt";
pub const STOPS: &str = "stops.txt";
pub const TRIPS_REPORT: &str = "trips_report.txt";
pub const LEAVES: &str = "leaves.txt";
pub const EVENTS: &str = "events.txt";
pub const GRID_VISITS: &str = "grid_visits.txt";
pub const REGIONS_REPORT: &str = "regions_report.txt";
pub const CORRELATION: &str = "correlation.txt";
pub const LABELS: &str = "labels.txt";
pub const ITEMSETS: &str = "itemsets.txt";
pub const LABEL_MAP: &str = "label_map.txt";
pub const DTN_SUMMARY: &str = "dtn_summary.txt";

/// Sample sets fitted by the stats stage, with their artifact stems.
pub const SAMPLE_SETS: [&str; 3] = ["trip_length", "trip_duration", "stay_time"];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("missing artifact {artifact}: run stage `{stage}` first")]
    MissingArtifact { artifact: String, stage: Stage },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("stage `{stage}`: {message}")]
    Stage { stage: Stage, message: String },
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Trips,
    Regions,
    Stats,
    Functions,
    Dtn,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Ingest, Stage::Trips, Stage::Regions, Stage::Stats, Stage::Functions, Stage::Dtn];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Trips => "trips",
            Stage::Regions => "regions",
            Stage::Stats => "stats",
            Stage::Functions => "functions",
            Stage::Dtn => "dtn",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage '{s}'"))
    }
}

/// What a stage run produced, for reporting.
#[derive(Clone, Debug)]
pub struct StageReport {
    pub stage: Stage,
    pub outputs: Vec<String>,
    pub lines: Vec<String>,
}

struct StageOutput {
    inputs: BTreeMap<String, String>,
    files: Vec<(String, Vec<u8>)>,
    lines: Vec<String>,
    seed: u64,
}

impl StageOutput {
    fn new() -> Self {
        StageOutput {
            inputs: BTreeMap::new(),
            files: Vec::new(),
            lines: Vec::new(),
            seed: 0,
        }
    }

    fn file(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
    config_hash: String,
}

fn stage_err(stage: Stage) -> impl Fn(String) -> PipelineError {
    move |message| PipelineError::Stage { stage, message }
}

fn lines_of(bytes: &[u8]) -> impl Iterator<Item = (usize, String)> + '_ {
    Cursor::new(bytes)
        .lines()
        .map_while(Result::ok)
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn render<F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>>(f: F) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to a Vec cannot fail");
    buf
}

impl Pipeline {
    pub fn new(config: PipelineConfig, out_dir: PathBuf) -> Result<Self, PipelineError> {
        config.validate()?;
        let config_hash = sha256_hex(&serde_json::to_vec(&config).map_err(|e| PipelineError::Io(e.to_string()))?);
        Ok(Pipeline {
            config,
            out_dir,
            config_hash,
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn run(&self, stages: &[Stage]) -> Result<Vec<StageReport>, PipelineError> {
        fs::create_dir_all(&self.out_dir)?;
        stages.iter().map(|&s| self.run_stage(s)).collect()
    }

    pub fn run_all(&self) -> Result<Vec<StageReport>, PipelineError> {
        self.run(&Stage::ALL)
    }

    pub fn run_stage(&self, stage: Stage) -> Result<StageReport, PipelineError> {
        fs::create_dir_all(&self.out_dir)?;
        let out = match stage {
            Stage::Ingest => self.ingest()?,
            Stage::Trips => self.trips()?,
            Stage::Regions => self.regions()?,
            Stage::Stats => self.stats()?,
            Stage::Functions => self.functions()?,
            Stage::Dtn => self.dtn()?,
        };
        let mut record = StageRecord {
            config_hash: self.config_hash.clone(),
            seed: out.seed,
            inputs: out.inputs,
            outputs: BTreeMap::new(),
        };
        for (name, bytes) in &out.files {
            write_atomic(&self.out_dir.join(name), bytes)?;
            record.outputs.insert(name.clone(), sha256_hex(bytes));
        }
        let mut manifest = Manifest::load(&self.out_dir)?;
        manifest.stages.insert(stage.name().to_string(), record);
        manifest.save(&self.out_dir)?;
        Ok(StageReport {
            stage,
            outputs: out.files.into_iter().map(|(n, _)| n).collect(),
            lines: out.lines,
        })
    }

    /// Reads an artifact produced by `producer`, recording its hash as an input.
    fn artifact(&self, name: &str, producer: Stage, out: &mut StageOutput) -> Result<Vec<u8>, PipelineError> {
        let path = self.out_dir.join(name);
        if !path.exists() {
            return Err(PipelineError::MissingArtifact {
                artifact: name.to_string(),
                stage: producer,
            });
        }
        let bytes = fs::read(&path)?;
        out.inputs.insert(name.to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    fn external(&self, path: &Path, stage: Stage, out: &mut StageOutput) -> Result<Vec<u8>, PipelineError> {
        let bytes = fs::read(path).map_err(|e| stage_err(stage)(format!("{}: {e}", path.display())))?;
        out.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    fn read_points(&self, out: &mut StageOutput) -> Result<Vec<GpsPoint>, PipelineError> {
        let bytes = self.artifact(POINTS, Stage::Ingest, out)?;
        let report = ingest::parse_trace(Cursor::new(bytes), TraceFormat::Canonical, &ParseOptions::default())
            .map_err(|e| PipelineError::Io(e.to_string()))?;
        if let Some(r) = report.rejects.first() {
            return Err(PipelineError::Io(format!("{POINTS} line {}: {}", r.line, r.reason)));
        }
        Ok(report.points)
    }

    fn read_trips(&self, out: &mut StageOutput) -> Result<Vec<Trip>, PipelineError> {
        let bytes = self.artifact(TRIPS, Stage::Trips, out)?;
        lines_of(&bytes)
            .map(|(n, l)| trajectory::parse_trip(&l).map_err(|e| PipelineError::Io(format!("{TRIPS} line {n}: {e}"))))
            .collect()
    }

    fn read_events(&self, out: &mut StageOutput) -> Result<Vec<regions::VisitEvent>, PipelineError> {
        let bytes = self.artifact(EVENTS, Stage::Regions, out)?;
        regions::read_events(Cursor::new(bytes)).map_err(|e| PipelineError::Io(format!("{EVENTS}: {e}")))
    }

    fn ingest(&self) -> Result<StageOutput, PipelineError> {
        let cfg = &self.config.ingest;
        let err = stage_err(Stage::Ingest);
        let bounds = cfg.bounds.resolve().map_err(&err)?;
        let mut out = StageOutput::new();
        let mut sources = Vec::new();
        let mut rejects = Vec::new();
        let mut report = vec!["source;total_lines;accepted;duplicates;rejected;invalid_coordinates".to_string()];
        for src in &cfg.sources {
            let bytes = self.external(&src.path, Stage::Ingest, &mut out)?;
            let opts = ParseOptions {
                utc_offset_s: cfg.utc_offset_s,
                taxi_id: src.taxi_id.as_deref().map(TaxiId::new),
            };
            let parsed = ingest::parse_trace(Cursor::new(bytes), src.format, &opts).map_err(|e| err(e.to_string()))?;
            let name = src.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            report.push(format!(
                "{};{};{};{};{};{}",
                name,
                parsed.total_lines,
                parsed.accepted,
                parsed.duplicates,
                parsed.rejects.len(),
                parsed.invalid_coordinate_count()
            ));
            ingest::write_rejects(&name, &parsed.rejects, &mut rejects)?;
            sources.push(parsed.points);
        }
        let (merged, cross_dupes) = ingest::merge_sources(sources);
        let kept = ingest::clip_to_bounds(&merged, &bounds);
        report.push(format!("cross_source_duplicates;{cross_dupes}"));
        report.push(format!("outside_bounds;{}", merged.len() - kept.len()));
        report.push(format!("points;{}", kept.len()));
        out.lines.push(format!("{} points kept, {} outside bounds", kept.len(), merged.len() - kept.len()));
        out.file(POINTS, render(|b| ingest::write_canonical(&kept, b)));
        out.file(REJECTS, rejects);
        out.file(INGEST_REPORT, (report.join("\n") + "\n").into_bytes());
        Ok(out)
    }

    fn trips(&self) -> Result<StageOutput, PipelineError> {
        let mut out = StageOutput::new();
        let points = self.read_points(&mut out)?;
        let params = self.config.trips.params();
        let (mut trips, mut stops, mut trajectories) = (Vec::new(), Vec::new(), 0);
        for taxi in ingest::group_by_taxi(&points) {
            let r = trajectory::process_taxi(taxi, &params);
            trajectories += r.trajectories;
            trips.extend(r.trips);
            stops.extend(r.stops);
        }
        let report = format!(
            "taxis;{}\ntrajectories;{}\nstops;{}\ntrips;{}\n",
            ingest::group_by_taxi(&points).len(),
            trajectories,
            stops.len(),
            trips.len()
        );
        out.lines.push(format!("{} trips, {} stops from {} trajectories", trips.len(), stops.len(), trajectories));
        out.file(TRIPS, render(|b| trajectory::write_trips(&trips, b)));
        out.file(STOPS, render(|b| write_stops(&stops, b)));
        out.file(TRIPS_REPORT, report.into_bytes());
        Ok(out)
    }

    fn regions(&self) -> Result<StageOutput, PipelineError> {
        let cfg = &self.config.regions;
        let err = stage_err(Stage::Regions);
        let bounds = self.config.ingest.bounds.resolve().map_err(&err)?;
        let mut out = StageOutput::new();
        let trips = self.read_trips(&mut out)?;
        let tree_events: Vec<(f64, f64)> = match cfg.tree_events {
            TreeEvents::GpsPoints => self.read_points(&mut out)?.iter().map(|p| (p.lat, p.lon)).collect(),
            TreeEvents::TripEndpoints => trips
                .iter()
                .flat_map(|t| [(t.depart.lat, t.depart.lon), (t.arrive.lat, t.arrive.lon)])
                .collect(),
        };
        let params = QuadTreeParams {
            threshold_fraction: cfg.threshold_fraction,
            max_depth: cfg.max_depth,
        };
        let tree = regions::build_quadtree(&tree_events, &bounds, &params).map_err(|e| err(e.to_string()))?;
        let (events, dropped) = regions::trips_to_events(&trips, &tree);
        let arrivals: Vec<(f64, f64)> = trips.iter().map(|t| (t.arrive.lat, t.arrive.lon)).collect();
        let (grid, outside) = regions::grid_visit_counts(&arrivals, &bounds, cfg.grid_rows, cfg.grid_cols).map_err(|e| err(e.to_string()))?;
        let report = format!(
            "tree_events;{}\nleaves;{}\nvisit_events;{}\ndropped_trips;{}\ngrid_outside;{}\n",
            tree_events.len(),
            tree.leaf_count(),
            events.len(),
            dropped,
            outside
        );
        out.lines.push(format!("{} leaf regions, {} events", tree.leaf_count(), events.len()));
        out.file(LEAVES, render(|b| regions::write_leaves(&tree, b)));
        out.file(EVENTS, render(|b| regions::write_events(&events, b)));
        out.file(GRID_VISITS, render(|b| ingest::write_grid_counts(&grid, b)));
        out.file(REGIONS_REPORT, report.into_bytes());
        Ok(out)
    }

    fn stats(&self) -> Result<StageOutput, PipelineError> {
        let cfg = &self.config.stats;
        let err = stage_err(Stage::Stats);
        let mut out = StageOutput::new();
        let trips = self.read_trips(&mut out)?;
        let stops_bytes = self.artifact(STOPS, Stage::Trips, &mut out)?;
        let stays: Vec<f64> = lines_of(&stops_bytes)
            .map(|(n, l)| parse_stop_dwell(&l).map_err(|e| PipelineError::Io(format!("{STOPS} line {n}: {e}"))))
            .collect::<Result<_, _>>()?;
        let sets: [Vec<f64>; 3] = [
            trips.iter().map(|t| t.length_m).collect(),
            trips.iter().map(|t| t.duration_s as f64).collect(),
            stays,
        ];
        for (stem, samples) in SAMPLE_SETS.iter().zip(sets) {
            let fit = fit_report(&samples, cfg.x_min, cfg.ccdf_points);
            out.lines.push(format!("{stem}: {}", fit.headline));
            out.file(format!("stats_{stem}.txt"), fit.table);
            out.file(format!("ccdf_{stem}.txt"), fit.ccdf);
        }

        let grid_bytes = self.artifact(GRID_VISITS, Stage::Regions, &mut out)?;
        let visits = ingest::read_grid_counts(Cursor::new(grid_bytes)).map_err(|e| err(format!("{GRID_VISITS}: {e}")))?;
        let corr = match &self.config.regions.road_counts {
            None => "n;r\n0;NA (no road counts configured)\n".to_string(),
            Some(path) => {
                let bytes = self.external(path, Stage::Stats, &mut out)?;
                let roads = ingest::read_grid_counts(Cursor::new(bytes)).map_err(|e| err(format!("{}: {e}", path.display())))?;
                if roads.rows != visits.rows || roads.cols != visits.cols || roads.bounds != visits.bounds {
                    return Err(err(format!("{}: grid shape or bounds differ from {GRID_VISITS}", path.display())));
                }
                let x: Vec<f64> = roads.counts.iter().map(|&c| c as f64).collect();
                let y: Vec<f64> = visits.counts.iter().map(|&c| c as f64).collect();
                match stats::pearson(&x, &y) {
                    Ok(c) => {
                        out.lines.push(format!("road/visit correlation r = {:.4}", c.r));
                        format!("n;r\n{};{}\n", c.n, c.r)
                    }
                    Err(e) => format!("n;r\n{};NA ({e})\n", x.len()),
                }
            }
        };
        out.file(CORRELATION, corr.into_bytes());
        Ok(out)
    }

    fn functions(&self) -> Result<StageOutput, PipelineError> {
        let cfg = &self.config.functions;
        let err = stage_err(Stage::Functions);
        let mut out = StageOutput::new();
        let events = self.read_events(&mut out)?;
        let leaves_bytes = self.artifact(LEAVES, Stage::Regions, &mut out)?;
        let tree = regions::read_leaves(Cursor::new(leaves_bytes)).map_err(|e| err(format!("{LEAVES}: {e}")))?;
        let leaves = tree.leaves();
        let windows = cfg.time_windows().map_err(&err)?;
        let tables = functions::build_hourly_tables(&events, self.config.ingest.utc_offset_s);
        let hourly = functions::mine_hourly(&tables, cfg.minsup).map_err(|e| err(e.to_string()))?;
        let universe: Vec<_> = leaves.iter().map(|l| l.region_id).collect();
        let labels = functions::classify_regions(hourly.iter().map(|(h, v)| (*h, v.as_slice())), &windows, &universe, cfg.score_rule);
        let mut counts: BTreeMap<functions::Label, usize> = BTreeMap::new();
        for f in &labels {
            *counts.entry(f.label).or_default() += 1;
        }
        let summary: Vec<String> = counts.iter().map(|(l, n)| format!("{l} {n}")).collect();
        out.lines.push(format!("{} hours mined; labels: {}", tables.len(), summary.join(", ")));
        out.file(LABELS, render(|b| functions::write_labels(&labels, b)));
        out.file(ITEMSETS, render(|b| functions::write_itemsets(&hourly, b)));
        out.file(LABEL_MAP, render(|b| functions::write_label_map(&leaves, &labels, b)));
        Ok(out)
    }

    fn dtn(&self) -> Result<StageOutput, PipelineError> {
        let cfg = &self.config.dtn;
        let err = stage_err(Stage::Dtn);
        let mut out = StageOutput::new();
        let events = self.read_events(&mut out)?;
        let labels_bytes = self.artifact(LABELS, Stage::Functions, &mut out)?;
        let labels: Vec<RegionFunction> = lines_of(&labels_bytes)
            .skip(1)
            .map(|(n, l)| functions::parse_label_line(&l).map_err(|e| PipelineError::Io(format!("{LABELS} line {n}: {e}"))))
            .collect::<Result<_, _>>()?;
        let windows = self.config.functions.time_windows().map_err(&err)?;
        out.seed = derive_seed(self.config.rng_seed, Stage::Dtn.name());

        let mut summary = vec!["scenario;policy;runs;mean_ratio".to_string()];
        for sc in &cfg.scenarios {
            let eval = sc.eval().map_err(&err)?;
            let history = sc.history().map_err(&err)?;
            let hot = match &sc.hot_regions {
                Some(h) => h.iter().copied().collect(),
                None => dtn::hot_regions_at(&labels, &windows, eval.start, self.config.ingest.utc_offset_s),
            };
            let scenario = SimScenario {
                name: sc.name.clone(),
                eval,
                history,
                hot_regions: hot,
                publishers: cfg.publishers,
                subscribers: cfg.subscribers,
                bin_width: cfg.bin_width_s,
                disjoint: cfg.disjoint,
            };
            let base = derive_seed(self.config.rng_seed, &format!("dtn/{}", sc.name));
            let seeds: Vec<u64> = (0..cfg.runs as u64).map(|i| base.wrapping_add(i)).collect();
            let results = dtn::run_scenario(&events, &scenario, &cfg.policies, &seeds).map_err(|e| err(format!("scenario {}: {e}", sc.name)))?;
            let s = dtn::summarize(&results);
            for p in &s {
                summary.push(format!("{};{};{};{}", sc.name, p.policy, p.runs, p.mean_ratio));
            }
            let improvement = dtn::history_improvement(&s);
            summary.push(format!(
                "{};history_vs_random;;{}",
                sc.name,
                improvement.map_or("NA".to_string(), |x| x.to_string())
            ));
            let means: Vec<String> = s.iter().map(|p| format!("{} {:.3}", p.policy, p.mean_ratio)).collect();
            out.lines.push(format!("{}: {} hot regions; {}", sc.name, scenario.hot_regions.len(), means.join(", ")));
            out.file(format!("dtn_{}_runs.txt", sc.name), render(|b| dtn::write_runs(&results, b)));
            out.file(format!("dtn_{}_summary.txt", sc.name), render(|b| dtn::write_summary(&s, b)));
        }
        out.file(DTN_SUMMARY, (summary.join("\n") + "\n").into_bytes());
        Ok(out)
    }
}

pub fn write_stops<W: Write>(stops: &[StopPoint], mut out: W) -> std::io::Result<()> {
    for s in stops {
        writeln!(
            out,
            "{};{};{};{};{};{}",
            s.taxi,
            s.dwell_start,
            s.dwell_end,
            s.centroid_lat,
            s.centroid_lon,
            s.dwell_s()
        )?;
    }
    Ok(())
}

fn parse_stop_dwell(line: &str) -> Result<f64, String> {
    let f: Vec<&str> = line.trim().split(';').collect();
    if f.len() != 6 {
        return Err(format!("expected 6 fields, got {}", f.len()));
    }
    f[5].parse().map_err(|_| format!("bad dwell '{}'", f[5]))
}

/// Rendered fit comparison for one sample set.
pub struct FitReport {
    pub headline: String,
    pub table: Vec<u8>,
    pub ccdf: Vec<u8>,
    pub text: String,
}

/// Fits every family to the positive finite samples at or above `x_min`.
pub fn fit_report(samples: &[f64], x_min: Option<f64>, ccdf_points: usize) -> FitReport {
    let kept: Vec<f64> = samples
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > 0.0 && x_min.is_none_or(|m| *x >= m))
        .collect();
    let set = stats::fit_all(&kept, x_min);
    match set.compare() {
        Ok(cmp) => FitReport {
            headline: format!("n = {}, best {}", kept.len(), cmp.best_model()),
            table: render(|b| stats::write_comparison(&cmp, &set.failures, b)),
            ccdf: render(|b| stats::write_ccdf(&stats::ccdf_table(&kept, &cmp.fits, ccdf_points), &cmp.fits, b)),
            text: stats::render_comparison(&cmp, &set.failures),
        },
        Err(e) => {
            let mut table = b"model;params;log_likelihood;aic;delta;weight;best\n".to_vec();
            let mut text = format!("no comparison for {} samples: {e}\n", kept.len());
            let failures: Vec<(Model, StatsError)> = set.failures;
            for (m, fe) in &failures {
                table.extend(format!("{m};failed: {fe};;;;;0\n").bytes());
                text.push_str(&format!("{:<20} failed: {fe}\n", m.name()));
            }
            FitReport {
                headline: format!("n = {}, no comparison ({e})", kept.len()),
                table,
                ccdf: render(|b| stats::write_ccdf(&stats::ccdf_table(&kept, &[], ccdf_points), &[], b)),
                text,
            }
        }
    }
}

/// One number per line; blank lines and `#` comments are skipped.
pub fn read_samples<R: BufRead>(source: R) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push(t.parse().map_err(|_| format!("line {}: bad number '{t}'", i + 1))?);
    }
    Ok(out)
}
