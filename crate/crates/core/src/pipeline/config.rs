use std::path::{Path, PathBuf};

use chrono::DateTime;
use serde::{Deserialize, Serialize};

use crate::dtn::{Policy, TimeRange, DEFAULT_BIN_WIDTH_S};
use crate::functions::{default_specs, ScoreRule, TimeWindows, DEFAULT_MINSUP};
use crate::ingest::{CityBounds, TraceFormat};
use crate::regions::{RegionId, DEFAULT_MAX_DEPTH, DEFAULT_THRESHOLD_FRACTION};
use crate::trajectory::{TripParams, DEFAULT_DELTA_T_S, DEFAULT_D_THRESHOLD_M, DEFAULT_T_THRESHOLD_S};

use super::PipelineError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub rng_seed: u64,
    /// Relative to the config file; the `--out` flag takes precedence.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub ingest: IngestConfig,
    #[serde(default)]
    pub trips: TripsConfig,
    #[serde(default)]
    pub regions: RegionsConfig,
    #[serde(default)]
    pub stats: StatsConfig,
    #[serde(default)]
    pub functions: FunctionsConfig,
    #[serde(default)]
    pub dtn: DtnConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub sources: Vec<SourceConfig>,
    pub bounds: BoundsSpec,
    /// Local clock offset from UTC, seconds.
    #[serde(default)]
    pub utc_offset_s: i64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub path: PathBuf,
    pub format: TraceFormat,
    #[serde(default)]
    pub taxi_id: Option<String>,
}

/// A preset city name or an explicit box.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum BoundsSpec {
    Preset(String),
    Box(CityBounds),
}

impl BoundsSpec {
    pub fn resolve(&self) -> Result<CityBounds, String> {
        match self {
            BoundsSpec::Box(b) => b.validate().map(|_| *b).map_err(|e| e.to_string()),
            BoundsSpec::Preset(name) => match name.as_str() {
                "rome" => Ok(CityBounds::rome()),
                "sanfrancisco" | "san_francisco" => Ok(CityBounds::san_francisco()),
                "beijing" => Ok(CityBounds::beijing()),
                _ => Err(format!("unknown city preset '{name}'")),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TripsConfig {
    pub delta_t_s: i64,
    pub d_threshold_m: f64,
    pub t_threshold_s: i64,
}

impl Default for TripsConfig {
    fn default() -> Self {
        TripsConfig {
            delta_t_s: DEFAULT_DELTA_T_S,
            d_threshold_m: DEFAULT_D_THRESHOLD_M,
            t_threshold_s: DEFAULT_T_THRESHOLD_S,
        }
    }
}

impl TripsConfig {
    pub fn params(&self) -> TripParams {
        TripParams {
            delta_t: self.delta_t_s,
            d_threshold: self.d_threshold_m,
            t_threshold: self.t_threshold_s,
        }
    }
}

/// Which events build the quad-tree.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TreeEvents {
    #[default]
    GpsPoints,
    TripEndpoints,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RegionsConfig {
    pub threshold_fraction: f64,
    pub max_depth: u32,
    pub tree_events: TreeEvents,
    /// Uniform grid of trip-end visits, paired with `road_counts` for the correlation.
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub road_counts: Option<PathBuf>,
}

impl Default for RegionsConfig {
    fn default() -> Self {
        RegionsConfig {
            threshold_fraction: DEFAULT_THRESHOLD_FRACTION,
            max_depth: DEFAULT_MAX_DEPTH,
            tree_events: TreeEvents::default(),
            grid_rows: 10,
            grid_cols: 10,
            road_counts: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    /// Lower cutoff for the power-law families; sample minimum when absent.
    pub x_min: Option<f64>,
    pub ccdf_points: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            x_min: None,
            ccdf_points: 50,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct WindowsConfig {
    pub work: Vec<String>,
    pub entertainment: Vec<String>,
    pub home: Vec<String>,
}

impl Default for WindowsConfig {
    fn default() -> Self {
        let (work, entertainment, home) = default_specs();
        WindowsConfig {
            work,
            entertainment,
            home,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FunctionsConfig {
    pub minsup: f64,
    pub score_rule: ScoreRule,
    pub windows: WindowsConfig,
}

impl Default for FunctionsConfig {
    fn default() -> Self {
        FunctionsConfig {
            minsup: DEFAULT_MINSUP,
            score_rule: ScoreRule::default(),
            windows: WindowsConfig::default(),
        }
    }
}

impl FunctionsConfig {
    pub fn time_windows(&self) -> Result<TimeWindows, String> {
        TimeWindows::from_specs(&self.windows.work, &self.windows.entertainment, &self.windows.home).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DtnConfig {
    pub bin_width_s: i64,
    pub publishers: usize,
    pub subscribers: usize,
    pub runs: usize,
    /// Keep subscribers out of the publisher candidates.
    pub disjoint: bool,
    pub policies: Vec<Policy>,
    pub scenarios: Vec<ScenarioConfig>,
}

impl Default for DtnConfig {
    fn default() -> Self {
        DtnConfig {
            bin_width_s: DEFAULT_BIN_WIDTH_S,
            publishers: 100,
            subscribers: 100,
            runs: 100,
            disjoint: true,
            policies: Policy::ALL.to_vec(),
            scenarios: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// RFC 3339 with offset, e.g. `2008-02-05T15:00:00+08:00`.
    pub eval_start: String,
    #[serde(default = "one_hour")]
    pub duration_s: i64,
    #[serde(default)]
    pub history_start: Option<String>,
    /// Explicit hot regions; otherwise taken from the function labels.
    #[serde(default)]
    pub hot_regions: Option<Vec<RegionId>>,
}

fn one_hour() -> i64 {
    3600
}

fn parse_instant(s: &str) -> Result<i64, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|d| d.timestamp())
        .map_err(|e| format!("'{s}' is not an RFC 3339 time: {e}"))
}

impl ScenarioConfig {
    pub fn eval(&self) -> Result<TimeRange, String> {
        let start = parse_instant(&self.eval_start)?;
        TimeRange::new(start, start + self.duration_s).map_err(|e| e.to_string())
    }

    pub fn history(&self) -> Result<Option<TimeRange>, String> {
        self.history_start
            .as_deref()
            .map(|s| {
                let start = parse_instant(s)?;
                TimeRange::new(start, start + self.duration_s).map_err(|e| e.to_string())
            })
            .transpose()
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(vec![e.to_string()]))
    }

    /// Reads the file and applies `KEY=VALUE` overrides (dotted keys) before validation.
    /// Relative paths are resolved against the file's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        let mut value: toml::Value = toml::from_str(&text).map_err(|e| PipelineError::Config(vec![format!("{}: {e}", path.display())]))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let mut cfg: PipelineConfig = value.try_into().map_err(|e: toml::de::Error| PipelineError::Config(vec![e.to_string()]))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in &mut self.ingest.sources {
            join(&mut s.path);
        }
        if let Some(p) = &mut self.regions.road_counts {
            join(p);
        }
        if let Some(p) = &mut self.out_dir {
            join(p);
        }
    }

    /// Every violated field, not just the first.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut errs = Vec::new();
        if self.ingest.sources.is_empty() {
            errs.push("ingest.sources: at least one source is required".to_string());
        }
        for (i, s) in self.ingest.sources.iter().enumerate() {
            if s.format == TraceFormat::SanFrancisco && s.taxi_id.is_none() {
                errs.push(format!("ingest.sources[{i}].taxi_id: required for the sanfrancisco format"));
            }
        }
        if let Err(e) = self.ingest.bounds.resolve() {
            errs.push(format!("ingest.bounds: {e}"));
        }
        if self.trips.delta_t_s <= 0 {
            errs.push(format!("trips.delta_t_s: must be positive, got {}", self.trips.delta_t_s));
        }
        if !(self.trips.d_threshold_m > 0.0 && self.trips.d_threshold_m.is_finite()) {
            errs.push(format!("trips.d_threshold_m: must be positive, got {}", self.trips.d_threshold_m));
        }
        if self.trips.t_threshold_s <= 0 {
            errs.push(format!("trips.t_threshold_s: must be positive, got {}", self.trips.t_threshold_s));
        }
        let f = self.regions.threshold_fraction;
        if !(f > 0.0 && f <= 1.0) {
            errs.push(format!("regions.threshold_fraction: must be in (0, 1], got {f}"));
        }
        if self.regions.max_depth == 0 {
            errs.push("regions.max_depth: must be positive".to_string());
        }
        if self.regions.grid_rows == 0 || self.regions.grid_cols == 0 {
            errs.push("regions.grid_rows/grid_cols: must be positive".to_string());
        }
        if let Some(x) = self.stats.x_min {
            if !(x > 0.0 && x.is_finite()) {
                errs.push(format!("stats.x_min: must be positive, got {x}"));
            }
        }
        let m = self.functions.minsup;
        if !(m > 0.0 && m <= 1.0) {
            errs.push(format!("functions.minsup: must be in (0, 1], got {m}"));
        }
        if let Err(e) = self.functions.time_windows() {
            errs.push(format!("functions.windows: {e}"));
        }
        let d = &self.dtn;
        if d.bin_width_s <= 0 {
            errs.push(format!("dtn.bin_width_s: must be positive, got {}", d.bin_width_s));
        }
        if d.publishers == 0 {
            errs.push("dtn.publishers: must be positive".to_string());
        }
        if d.subscribers == 0 {
            errs.push("dtn.subscribers: must be positive".to_string());
        }
        if d.runs == 0 {
            errs.push("dtn.runs: must be positive".to_string());
        }
        if d.policies.is_empty() {
            errs.push("dtn.policies: at least one policy is required".to_string());
        }
        for (i, s) in d.scenarios.iter().enumerate() {
            if s.duration_s <= 0 {
                errs.push(format!("dtn.scenarios[{i}].duration_s: must be positive, got {}", s.duration_s));
            } else if let Err(e) = s.eval() {
                errs.push(format!("dtn.scenarios[{i}].eval_start: {e}"));
            }
            match s.history() {
                Err(e) => errs.push(format!("dtn.scenarios[{i}].history_start: {e}")),
                Ok(None) if d.policies.contains(&Policy::History) => {
                    errs.push(format!("dtn.scenarios[{i}].history_start: required by the history policy"))
                }
                Ok(_) => {}
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Config(errs))
        }
    }
}

/// Sets `a.b.c = VALUE` in a TOML tree. VALUE is read as a TOML literal, falling back to a string.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<(), PipelineError> {
    let bad = |msg: &str| PipelineError::Config(vec![format!("override '{assignment}': {msg}")]);
    let (key, raw) = assignment.split_once('=').ok_or_else(|| bad("expected KEY=VALUE"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(bad("empty key"));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| bad("path crosses a non-table value"))?;
        node = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node.as_table_mut().ok_or_else(|| bad("path crosses a non-table value"))?;
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
