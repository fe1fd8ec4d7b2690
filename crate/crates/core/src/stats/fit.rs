//! Maximum-likelihood fits of the four candidate families.

use std::f64::consts::PI;

use statrs::function::erf::erfc;

use super::gamma::ln_upper_gamma;
use super::optimize::NelderMead;
use super::{FitResult, Model, Params, StatsError};

/// Evaluation budget for the truncated power-law search.
pub const TPL_MAX_EVALUATIONS: usize = 10_000;
/// Convergence tolerance on the log-likelihood for the truncated power-law search.
pub const TPL_LOGL_TOLERANCE: f64 = 1e-8;

const ALPHA_MAX: f64 = 50.0;
// cutoff rate is searched as rate * mean(samples)
const SCALED_RATE_MAX: f64 = 1e4;

fn check_positive(samples: &[f64]) -> Result<(), StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: samples.len() });
    }
    match samples.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        Some(index) => Err(StatsError::NonPositiveSample { index, value: samples[index] }),
        None => Ok(()),
    }
}

fn check_tail(samples: &[f64], x_min: f64) -> Result<(), StatsError> {
    check_positive(samples)?;
    if !(x_min > 0.0 && x_min.is_finite()) {
        return Err(StatsError::InvalidXmin(x_min));
    }
    match samples.iter().position(|&x| x < x_min) {
        Some(index) => Err(StatsError::BelowXmin {
            index,
            value: samples[index],
            x_min,
        }),
        None => Ok(()),
    }
}

fn finish(model: Model, params: Params, log_likelihood: f64, n: usize) -> FitResult {
    let k = model.parameter_count();
    FitResult {
        model,
        params,
        log_likelihood,
        k,
        aic: -2.0 * log_likelihood + 2.0 * k as f64,
        n,
    }
}

/// Exponential on `(0, inf)`: rate = 1 / mean.
pub fn fit_exponential(samples: &[f64]) -> Result<FitResult, StatsError> {
    check_positive(samples)?;
    let n = samples.len() as f64;
    let sum: f64 = samples.iter().sum();
    let rate = n / sum;
    let ll = n * rate.ln() - rate * sum;
    Ok(finish(Model::Exponential, Params::Exponential { rate }, ll, samples.len()))
}

/// Lognormal with `mu`, `sigma` the mean and population standard deviation of `ln x`.
pub fn fit_lognormal(samples: &[f64]) -> Result<FitResult, StatsError> {
    check_positive(samples)?;
    let n = samples.len() as f64;
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let sum_log: f64 = logs.iter().sum();
    let mu = sum_log / n;
    let var = logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if !(sigma > 0.0) {
        return Err(StatsError::Degenerate("all samples are equal, lognormal sigma is zero".into()));
    }
    let ll = -sum_log - n * sigma.ln() - 0.5 * n * (2.0 * PI).ln() - 0.5 * n;
    Ok(finish(Model::Lognormal, Params::Lognormal { mu, sigma }, ll, samples.len()))
}

/// Continuous power law on `[x_min, inf)`: `alpha = 1 + n / sum(ln(x / x_min))`.
pub fn fit_powerlaw(samples: &[f64], x_min: f64) -> Result<FitResult, StatsError> {
    check_tail(samples, x_min)?;
    let n = samples.len() as f64;
    let sum_log_ratio: f64 = samples.iter().map(|x| (x / x_min).ln()).sum();
    if !(sum_log_ratio > 0.0) {
        return Err(StatsError::Degenerate("all samples equal x_min, power-law exponent is unbounded".into()));
    }
    let alpha = 1.0 + n / sum_log_ratio;
    let ll = n * (alpha - 1.0).ln() - n * x_min.ln() - alpha * sum_log_ratio;
    Ok(finish(Model::PowerLaw, Params::PowerLaw { alpha, x_min }, ll, samples.len()))
}

/// `ln` of the normalizer `∫_{x_min}^inf x^-alpha e^(-rate x) dx`.
pub(crate) fn tpl_ln_norm(alpha: f64, rate: f64, x_min: f64) -> f64 {
    if rate > 0.0 {
        (alpha - 1.0) * rate.ln() + ln_upper_gamma(1.0 - alpha, rate * x_min)
    } else if alpha > 1.0 {
        (1.0 - alpha) * x_min.ln() - (alpha - 1.0).ln()
    } else {
        f64::INFINITY
    }
}

struct TailSums {
    n: f64,
    sum: f64,
    sum_log: f64,
}

impl TailSums {
    fn tpl_log_likelihood(&self, alpha: f64, rate: f64, x_min: f64) -> f64 {
        let ln_z = tpl_ln_norm(alpha, rate, x_min);
        if !ln_z.is_finite() {
            return f64::NEG_INFINITY;
        }
        -alpha * self.sum_log - rate * self.sum - self.n * ln_z
    }
}

/// Power law with exponential cutoff on `[x_min, inf)`, density ∝ `x^-alpha e^(-rate x)`,
/// fitted over `alpha >= 0`, `rate >= 0` by a bounded simplex search.
pub fn fit_truncated_powerlaw(samples: &[f64], x_min: f64) -> Result<FitResult, StatsError> {
    check_tail(samples, x_min)?;
    let sums = TailSums {
        n: samples.len() as f64,
        sum: samples.iter().sum(),
        sum_log: samples.iter().map(|x| x.ln()).sum(),
    };
    let scale = sums.sum / sums.n;
    let objective = |p: &[f64]| -sums.tpl_log_likelihood(p[0], p[1] / scale, x_min);

    // boundary members of the family: the pure power law (rate 0) and the shifted exponential (alpha 0)
    let mut candidates: Vec<(Vec<f64>, f64)> = Vec::new();
    let sum_log_ratio = sums.sum_log - sums.n * x_min.ln();
    if sum_log_ratio > 0.0 {
        let alpha = (1.0 + sums.n / sum_log_ratio).min(ALPHA_MAX);
        let p = vec![alpha, 0.0];
        let v = objective(&p);
        candidates.push((p, v));
    }
    if scale > x_min {
        let p = vec![0.0, (scale / (scale - x_min)).min(SCALED_RATE_MAX)];
        let v = objective(&p);
        candidates.push((p, v));
    }

    let nm = NelderMead {
        lower: &[0.0, 0.0],
        upper: &[ALPHA_MAX, SCALED_RATE_MAX],
        f_tol: TPL_LOGL_TOLERANCE,
        max_evaluations: TPL_MAX_EVALUATIONS,
    };
    let mut used = candidates.len();
    let starts: Vec<Vec<f64>> = candidates
        .iter()
        .map(|(p, _)| vec![p[0].max(0.1), p[1].max(1e-3)])
        .chain(std::iter::once(vec![1.0, 1.0]))
        .collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in &starts {
        let m = NelderMead {
            max_evaluations: TPL_MAX_EVALUATIONS.saturating_sub(used) / 4,
            ..nm
        }
        .minimize(objective, start, &[0.5, 0.5]);
        used += m.evaluations;
        if best.as_ref().is_none_or(|b| m.value < b.1) {
            best = Some((m.x, m.value));
        }
    }

    // polish from the incumbent until a restart no longer improves it
    let (mut x, mut value) = best.expect("at least one start");
    let mut converged = false;
    while used < TPL_MAX_EVALUATIONS {
        let step = [0.05 * x[0].abs().max(0.1), 0.05 * x[1].abs().max(1e-3)];
        let m = NelderMead {
            max_evaluations: TPL_MAX_EVALUATIONS - used,
            ..nm
        }
        .minimize(objective, &x, &step);
        used += m.evaluations;
        let improved = value - m.value;
        if m.value < value {
            x = m.x;
            value = m.value;
        }
        if m.converged && improved <= TPL_LOGL_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(StatsError::NotConverged { evaluations: used });
    }
    for (p, v) in candidates {
        if v < value {
            x = p;
            value = v;
        }
    }
    if !value.is_finite() {
        return Err(StatsError::Degenerate("truncated power-law likelihood is not finite".into()));
    }
    Ok(finish(
        Model::TruncatedPowerLaw,
        Params::TruncatedPowerLaw {
            alpha: x[0],
            rate: x[1] / scale,
            x_min,
        },
        -value,
        samples.len(),
    ))
}

impl Params {
    /// Log-density at `x` (negative infinity outside the support).
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Params::Exponential { rate } if x >= 0.0 => rate.ln() - rate * x,
            Params::Lognormal { mu, sigma } if x > 0.0 => {
                let z = (x.ln() - mu) / sigma;
                -x.ln() - sigma.ln() - 0.5 * (2.0 * PI).ln() - 0.5 * z * z
            }
            Params::PowerLaw { alpha, x_min } if x >= x_min => (alpha - 1.0).ln() - x_min.ln() - alpha * (x / x_min).ln(),
            Params::TruncatedPowerLaw { alpha, rate, x_min } if x >= x_min => {
                -alpha * x.ln() - rate * x - tpl_ln_norm(alpha, rate, x_min)
            }
            _ => f64::NEG_INFINITY,
        }
    }

    /// `P(X >= x)` under the fitted model.
    pub fn ccdf(&self, x: f64) -> f64 {
        match *self {
            Params::Exponential { rate } => (-rate * x.max(0.0)).exp(),
            Params::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    1.0
                } else {
                    0.5 * erfc((x.ln() - mu) / (sigma * std::f64::consts::SQRT_2))
                }
            }
            Params::PowerLaw { alpha, x_min } => (x.max(x_min) / x_min).powf(1.0 - alpha),
            Params::TruncatedPowerLaw { alpha, rate, x_min } => {
                let x = x.max(x_min);
                if rate > 0.0 {
                    (ln_upper_gamma(1.0 - alpha, rate * x) - ln_upper_gamma(1.0 - alpha, rate * x_min)).exp()
                } else {
                    (x / x_min).powf(1.0 - alpha)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Params::Exponential { rate } => 1.0 / rate,
            Params::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Params::PowerLaw { alpha, x_min } => {
                if alpha > 2.0 {
                    x_min * (alpha - 1.0) / (alpha - 2.0)
                } else {
                    f64::INFINITY
                }
            }
            Params::TruncatedPowerLaw { alpha, rate, x_min } => {
                if rate > 0.0 {
                    (tpl_ln_norm(alpha - 1.0, rate, x_min) - tpl_ln_norm(alpha, rate, x_min)).exp()
                } else {
                    Params::PowerLaw { alpha, x_min }.mean()
                }
            }
        }
    }
}
