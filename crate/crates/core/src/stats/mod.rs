//! Distribution fitting with AIC / Akaike-weight model selection, Pearson correlation,
//! and empirical CCDF tables for plotting.

mod fit;
mod gamma;
mod optimize;

use std::fmt;
use std::io::Write;

use thiserror::Error;

pub use fit::{fit_exponential, fit_lognormal, fit_powerlaw, fit_truncated_powerlaw, TPL_LOGL_TOLERANCE, TPL_MAX_EVALUATIONS};
pub use gamma::ln_upper_gamma;
pub use optimize::{Minimum, NelderMead};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample {index} is {value}; samples must be positive and finite")]
    NonPositiveSample { index: usize, value: f64 },
    #[error("sample {index} is {value}, below x_min {x_min}")]
    BelowXmin { index: usize, value: f64, x_min: f64 },
    #[error("x_min must be positive and finite, got {0}")]
    InvalidXmin(f64),
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    #[error("optimizer did not converge within {evaluations} evaluations")]
    NotConverged { evaluations: usize },
    #[error("need at least two fits to compare, got {0}")]
    TooFewFits(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined: input vector is constant")]
    ConstantInput,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Model {
    Exponential,
    Lognormal,
    PowerLaw,
    TruncatedPowerLaw,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::Exponential, Model::Lognormal, Model::PowerLaw, Model::TruncatedPowerLaw];

    /// Estimated parameters; `x_min` is supplied, not estimated.
    pub fn parameter_count(self) -> usize {
        match self {
            Model::Exponential | Model::PowerLaw => 1,
            Model::Lognormal | Model::TruncatedPowerLaw => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Exponential => "exponential",
            Model::Lognormal => "lognormal",
            Model::PowerLaw => "powerlaw",
            Model::TruncatedPowerLaw => "truncated_powerlaw",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Params {
    Exponential { rate: f64 },
    Lognormal { mu: f64, sigma: f64 },
    PowerLaw { alpha: f64, x_min: f64 },
    TruncatedPowerLaw { alpha: f64, rate: f64, x_min: f64 },
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Params::Exponential { rate } => write!(f, "rate={rate}"),
            Params::Lognormal { mu, sigma } => write!(f, "mu={mu},sigma={sigma}"),
            Params::PowerLaw { alpha, x_min } => write!(f, "alpha={alpha},x_min={x_min}"),
            Params::TruncatedPowerLaw { alpha, rate, x_min } => write!(f, "alpha={alpha},rate={rate},x_min={x_min}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub model: Model,
    pub params: Params,
    pub log_likelihood: f64,
    pub k: usize,
    pub aic: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelComparison {
    pub fits: Vec<FitResult>,
    pub deltas: Vec<f64>,
    pub weights: Vec<f64>,
    /// Index into `fits` of the selected model.
    pub best: usize,
}

impl ModelComparison {
    pub fn best_fit(&self) -> &FitResult {
        &self.fits[self.best]
    }

    pub fn best_model(&self) -> Model {
        self.fits[self.best].model
    }
}

/// AIC differences and Akaike weights. The best model has the largest weight; exact ties
/// go to the model with fewer parameters, then to the earlier family in [`Model::ALL`].
pub fn compare_models(fits: &[FitResult]) -> Result<ModelComparison, StatsError> {
    if fits.len() < 2 {
        return Err(StatsError::TooFewFits(fits.len()));
    }
    let aic_min = fits.iter().map(|f| f.aic).fold(f64::INFINITY, f64::min);
    let deltas: Vec<f64> = fits.iter().map(|f| f.aic - aic_min).collect();
    let raw: Vec<f64> = deltas.iter().map(|d| (-d / 2.0).exp()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();

    let best = (0..fits.len())
        .min_by(|&a, &b| {
            weights[b]
                .total_cmp(&weights[a])
                .then(fits[a].k.cmp(&fits[b].k))
                .then(fits[a].model.cmp(&fits[b].model))
        })
        .expect("non-empty");
    Ok(ModelComparison {
        fits: fits.to_vec(),
        deltas,
        weights,
        best,
    })
}

/// Outcome of fitting every candidate family to one sample set.
#[derive(Clone, Debug)]
pub struct FitSet {
    pub fits: Vec<FitResult>,
    pub failures: Vec<(Model, StatsError)>,
    pub x_min: f64,
}

impl FitSet {
    pub fn compare(&self) -> Result<ModelComparison, StatsError> {
        compare_models(&self.fits)
    }
}

/// Fits all four families. Power-law families use `x_min`, defaulting to the sample minimum.
/// Families that fail are reported in `failures` and left out of `fits`.
pub fn fit_all(samples: &[f64], x_min: Option<f64>) -> FitSet {
    let x_min = x_min.unwrap_or_else(|| samples.iter().copied().fold(f64::INFINITY, f64::min));
    let mut set = FitSet {
        fits: Vec::new(),
        failures: Vec::new(),
        x_min,
    };
    for model in Model::ALL {
        let r = match model {
            Model::Exponential => fit_exponential(samples),
            Model::Lognormal => fit_lognormal(samples),
            Model::PowerLaw => fit_powerlaw(samples, x_min),
            Model::TruncatedPowerLaw => fit_truncated_powerlaw(samples, x_min),
        };
        match r {
            Ok(f) => set.fits.push(f),
            Err(e) => set.failures.push((model, e)),
        }
    }
    set
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationResult {
    pub r: f64,
    pub n: usize,
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: n });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(CorrelationResult { r, n })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CcdfRow {
    pub x: f64,
    pub empirical: f64,
    /// Model CCDF at `x`, aligned with the fits passed to [`ccdf_table`].
    pub models: Vec<f64>,
}

/// Empirical `P(X >= x)` on `points` log-spaced abscissae between the sample minimum and
/// maximum, alongside each fitted model's CCDF.
pub fn ccdf_table(samples: &[f64], fits: &[FitResult], points: usize) -> Vec<CcdfRow> {
    let mut sorted: Vec<f64> = samples.iter().copied().filter(|x| *x > 0.0 && x.is_finite()).collect();
    if sorted.is_empty() || points == 0 {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let n = sorted.len() as f64;
    let xs: Vec<f64> = if points == 1 || lo == hi {
        vec![lo]
    } else {
        (0..points)
            .map(|i| match i {
                0 => lo,
                i if i == points - 1 => hi,
                i => (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (points - 1) as f64).exp(),
            })
            .collect()
    };
    xs.into_iter()
        .map(|x| {
            let below = sorted.partition_point(|v| *v < x);
            CcdfRow {
                x,
                empirical: (sorted.len() - below) as f64 / n,
                models: fits.iter().map(|f| f.params.ccdf(x)).collect(),
            }
        })
        .collect()
}

/// Machine-readable comparison: header plus one `model;params;logL;AIC;delta;weight` line per fit.
pub fn write_comparison<W: Write>(cmp: &ModelComparison, failures: &[(Model, StatsError)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "model;params;log_likelihood;aic;delta;weight;best")?;
    for (i, f) in cmp.fits.iter().enumerate() {
        writeln!(
            out,
            "{};{};{};{};{};{};{}",
            f.model,
            f.params,
            f.log_likelihood,
            f.aic,
            cmp.deltas[i],
            cmp.weights[i],
            u8::from(i == cmp.best)
        )?;
    }
    for (model, err) in failures {
        writeln!(out, "{model};failed: {err};;;;;0")?;
    }
    Ok(())
}

/// Human-readable version of [`write_comparison`].
pub fn render_comparison(cmp: &ModelComparison, failures: &[(Model, StatsError)]) -> String {
    let mut s = format!(
        "{:<20} {:>16} {:>16} {:>12} {:>10}  {}\n",
        "model", "logL", "AIC", "delta", "weight", "params"
    );
    for (i, f) in cmp.fits.iter().enumerate() {
        let mark = if i == cmp.best { " *" } else { "" };
        s.push_str(&format!(
            "{:<20} {:>16.4} {:>16.4} {:>12.4} {:>10.6}  {}{}\n",
            f.model.name(),
            f.log_likelihood,
            f.aic,
            cmp.deltas[i],
            cmp.weights[i],
            f.params,
            mark
        ));
    }
    for (model, err) in failures {
        s.push_str(&format!("{:<20} failed: {}\n", model.name(), err));
    }
    s
}

pub fn write_ccdf<W: Write>(rows: &[CcdfRow], fits: &[FitResult], mut out: W) -> std::io::Result<()> {
    let mut header = vec!["x".to_string(), "empirical".to_string()];
    header.extend(fits.iter().map(|f| f.model.name().to_string()));
    writeln!(out, "{}", header.join(";"))?;
    for r in rows {
        let mut line = vec![r.x.to_string(), r.empirical.to_string()];
        line.extend(r.models.iter().map(f64::to_string));
        writeln!(out, "{}", line.join(";"))?;
    }
    Ok(())
}
