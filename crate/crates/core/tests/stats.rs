use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};

use taxi_regions::stats::{
    compare_models, fit_all, fit_exponential, fit_lognormal, fit_powerlaw, fit_truncated_powerlaw, ln_upper_gamma, pearson, FitResult, Model, Params,
    StatsError,
};

/// `∫_{x_min}^inf x^-alpha e^(-rate x) dx` by Simpson's rule in `u = ln x`.
fn tpl_norm_quadrature(alpha: f64, rate: f64, x_min: f64) -> f64 {
    if rate == 0.0 {
        return x_min.powf(1.0 - alpha) / (alpha - 1.0);
    }
    let f = |u: f64| ((1.0 - alpha) * u - rate * u.exp()).exp();
    let u0 = x_min.ln();
    // far enough that the cutoff term has killed the integrand
    let u1 = (u0.exp().max(60.0 / rate) * 1.5).ln().max(u0 + 1.0);
    let n = 200_000;
    let h = (u1 - u0) / n as f64;
    let mut s = f(u0) + f(u1);
    for i in 1..n {
        s += f(u0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn direct_log_likelihood(params: &Params, xs: &[f64]) -> f64 {
    match *params {
        Params::Exponential { rate } => xs.iter().map(|x| rate.ln() - rate * x).sum(),
        Params::Lognormal { mu, sigma } => xs
            .iter()
            .map(|x| -x.ln() - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - (x.ln() - mu).powi(2) / (2.0 * sigma * sigma))
            .sum(),
        Params::PowerLaw { alpha, x_min } => xs.iter().map(|x| (alpha - 1.0).ln() - x_min.ln() - alpha * (x / x_min).ln()).sum(),
        Params::TruncatedPowerLaw { alpha, rate, x_min } => {
            let ln_z = tpl_norm_quadrature(alpha, rate, x_min).ln();
            xs.iter().map(|x| -alpha * x.ln() - rate * x - ln_z).sum()
        }
    }
}

fn pareto(rng: &mut ChaCha8Rng, alpha: f64, x_min: f64, n: usize) -> Vec<f64> {
    (0..n).map(|_| x_min * (1.0 - rng.gen::<f64>()).powf(-1.0 / (alpha - 1.0))).collect()
}

fn cutoff_pareto(rng: &mut ChaCha8Rng, alpha: f64, rate: f64, x_min: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = x_min * (1.0 - rng.gen::<f64>()).powf(-1.0 / (alpha - 1.0));
        if rng.gen::<f64>() < (-rate * (x - x_min)).exp() {
            out.push(x);
        }
    }
    out
}

fn sample_set() -> impl Strategy<Value = Vec<f64>> {
    (0u64..10_000, 0usize..4, 200usize..2000).prop_map(|(seed, family, n)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match family {
            0 => Exp::new(1.0 / 30.0).unwrap().sample_iter(&mut rng).take(n).collect(),
            1 => LogNormal::new(2.0, 0.8).unwrap().sample_iter(&mut rng).take(n).collect(),
            2 => pareto(&mut rng, 2.2, 3.0, n),
            _ => cutoff_pareto(&mut rng, 1.6, 0.02, 2.0, n),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn log_likelihoods_match_direct_evaluation(xs in sample_set()) {
        let set = fit_all(&xs, None);
        prop_assert!(set.failures.is_empty(), "{:?}", set.failures);
        for f in &set.fits {
            let direct = direct_log_likelihood(&f.params, &xs);
            prop_assert!((f.log_likelihood - direct).abs() <= 1e-8 * direct.abs().max(1.0), "{}: {} vs {}", f.model, f.log_likelihood, direct);
            prop_assert!((f.aic - (-2.0 * f.log_likelihood + 2.0 * f.k as f64)).abs() <= 1e-9 * f.aic.abs().max(1.0));
            prop_assert_eq!(f.k, f.model.parameter_count());
        }
    }

    #[test]
    fn truncated_powerlaw_dominates_nested_fits(xs in sample_set()) {
        let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let tpl = fit_truncated_powerlaw(&xs, x_min).unwrap();
        let pl = fit_powerlaw(&xs, x_min).unwrap();
        // the alpha = 0 member is an exponential shifted to x_min
        let mean_excess = xs.iter().map(|x| x - x_min).sum::<f64>() / xs.len() as f64;
        let shifted_exp: f64 = xs.iter().map(|x| -mean_excess.ln() - (x - x_min) / mean_excess).sum();
        prop_assert!(tpl.log_likelihood >= pl.log_likelihood - 1e-6);
        prop_assert!(tpl.log_likelihood >= shifted_exp - 1e-6);
    }

    #[test]
    fn weights_normalised_and_shift_invariant(aics in prop::collection::vec(-1e4f64..1e4, 2..6), shift in -1e3f64..1e3) {
        let fits: Vec<FitResult> = aics.iter().enumerate().map(|(i, &aic)| FitResult {
            model: Model::ALL[i % 4],
            params: Params::Exponential { rate: 1.0 },
            log_likelihood: 0.0,
            k: Model::ALL[i % 4].parameter_count(),
            aic,
            n: 10,
        }).collect();
        let a = compare_models(&fits).unwrap();
        prop_assert!((a.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(a.weights.iter().all(|w| (0.0..=1.0).contains(w)));
        prop_assert_eq!(a.deltas.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
        let shifted: Vec<FitResult> = fits.iter().cloned().map(|mut f| { f.aic += shift; f }).collect();
        let b = compare_models(&shifted).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        let mut reversed = fits.clone();
        reversed.reverse();
        prop_assert_eq!(compare_models(&reversed).unwrap().best_model(), a.best_model());
    }

    #[test]
    fn pearson_bounded_symmetric_affine_invariant(pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..50), a in 0.1f64..10.0, b in -50.0f64..50.0) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        if let Ok(r) = pearson(&x, &y) {
            prop_assert!(r.r.abs() <= 1.0);
            prop_assert!((pearson(&y, &x).unwrap().r - r.r).abs() < 1e-12);
            let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((pearson(&xt, &y).unwrap().r - r.r).abs() < 1e-9);
        }
    }
}

#[test]
fn incomplete_gamma_against_quadrature() {
    // Γ(s, x) = x^s ∫_1^inf t^(s-1) e^(-x t) dt, the same integral as the cutoff normaliser
    for &(s, x) in &[(0.5, 0.3), (-0.5, 0.01), (-1.0, 2.0), (-2.5, 0.5), (1.0, 3.0)] {
        let integral = tpl_norm_quadrature(1.0 - s, x, 1.0);
        let expected = s * x.ln() + integral.ln();
        assert!((ln_upper_gamma(s, x) - expected).abs() < 1e-9, "s={s} x={x}");
    }
}

#[test]
fn exponential_recovery_and_errors() {
    let fit = fit_exponential(&[2.0; 5]).unwrap();
    assert_eq!(fit.params, Params::Exponential { rate: 0.5 });
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let xs: Vec<f64> = Exp::new(1.0 / 5500.0).unwrap().sample_iter(&mut rng).take(10_000).collect();
    let Params::Exponential { rate } = fit_exponential(&xs).unwrap().params else { unreachable!() };
    assert!((rate * 5500.0 - 1.0).abs() < 0.03);
    assert!(matches!(fit_exponential(&[1.0]), Err(StatsError::TooFewSamples { .. })));
    assert_eq!(fit_exponential(&[1.0, 0.0, 2.0]).unwrap_err(), StatsError::NonPositiveSample { index: 1, value: 0.0 });
}

#[test]
fn lognormal_recovery_and_degenerate() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let xs: Vec<f64> = LogNormal::new(1.0, 0.5).unwrap().sample_iter(&mut rng).take(10_000).collect();
    let Params::Lognormal { mu, sigma } = fit_lognormal(&xs).unwrap().params else { unreachable!() };
    assert!((mu - 1.0).abs() < 0.02 && (sigma - 0.5).abs() < 0.02);
    let e = std::f64::consts::E;
    assert!(matches!(fit_lognormal(&[e; 4]), Err(StatsError::Degenerate(_))));
    // logs of exponential draws: mu is the mean log
    let ys: Vec<f64> = Exp::new(1.0).unwrap().sample_iter(&mut rng).take(100).collect();
    let mean_log = ys.iter().map(|y| y.ln()).sum::<f64>() / 100.0;
    let Params::Lognormal { mu, .. } = fit_lognormal(&ys).unwrap().params else { unreachable!() };
    assert!((mu - mean_log).abs() < 1e-12);
}

#[test]
fn powerlaw_recovery_and_errors() {
    let e = std::f64::consts::E;
    let Params::PowerLaw { alpha, .. } = fit_powerlaw(&[3.0 * e; 20], 3.0).unwrap().params else { unreachable!() };
    assert!((alpha - 2.0).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let xs = pareto(&mut rng, 2.5, 1.0, 10_000);
    let Params::PowerLaw { alpha, .. } = fit_powerlaw(&xs, 1.0).unwrap().params else { unreachable!() };
    assert!((alpha - 2.5).abs() < 0.05);
    assert!(matches!(fit_powerlaw(&[0.5, 2.0], 1.0), Err(StatsError::BelowXmin { index: 0, .. })));
}

#[test]
fn truncated_powerlaw_nesting_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let xs = pareto(&mut rng, 2.5, 1.0, 10_000);
    let Params::TruncatedPowerLaw { alpha, rate, .. } = fit_truncated_powerlaw(&xs, 1.0).unwrap().params else { unreachable!() };
    let Params::PowerLaw { alpha: pl_alpha, .. } = fit_powerlaw(&xs, 1.0).unwrap().params else { unreachable!() };
    assert!(rate < 1e-4, "rate {rate}");
    assert!((alpha - pl_alpha).abs() < 0.1);

    let shifted: Vec<f64> = Exp::new(1.0 / 50.0).unwrap().sample_iter(&mut rng).take(10_000).map(|x: f64| x + 5.0).collect();
    let Params::TruncatedPowerLaw { alpha, rate, .. } = fit_truncated_powerlaw(&shifted, 5.0).unwrap().params else { unreachable!() };
    assert!(alpha < 0.1, "alpha {alpha}");
    assert!((rate * 50.0 - 1.0).abs() < 0.05);
}

#[test]
fn akaike_weight_reference_values() {
    let fit = |aic: f64| FitResult {
        model: Model::Exponential,
        params: Params::Exponential { rate: 1.0 },
        log_likelihood: 0.0,
        k: 1,
        aic,
        n: 1,
    };
    let w = compare_models(&[fit(10.0), fit(12.0)]).unwrap().weights;
    assert!((w[0] - 0.7311).abs() < 1e-4 && (w[1] - 0.2689).abs() < 1e-4);
    let w = compare_models(&[fit(3.0), fit(3.0)]).unwrap().weights;
    assert_eq!(w, vec![0.5, 0.5]);
    assert!(matches!(compare_models(&[fit(1.0)]), Err(StatsError::TooFewFits(1))));
}

#[test]
fn pearson_exact_lines_and_errors() {
    let x: Vec<f64> = (0..20).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
    let z: Vec<f64> = x.iter().map(|v| -v).collect();
    assert!((pearson(&x, &y).unwrap().r - 1.0).abs() < 1e-12);
    assert!((pearson(&x, &z).unwrap().r + 1.0).abs() < 1e-12);
    assert_eq!(pearson(&x, &[1.0; 20]).unwrap_err(), StatsError::ConstantInput);
}
