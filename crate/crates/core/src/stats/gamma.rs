//! Upper incomplete gamma function for any real shape, including zero and negative
//! values, which the truncated power-law normalizer needs when the exponent exceeds one.

use statrs::function::gamma::gamma_ui;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `ln Γ(s, x)` for real `s` and `x > 0`.
pub fn ln_upper_gamma(s: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0 && s.is_finite());
    if x >= 1.0 + s.max(0.0) {
        return ln_upper_gamma_cf(s, x);
    }
    if s > 0.0 {
        return gamma_ui(s, x).ln();
    }
    // s <= 0, x < 1: recur downward from a shape in (0, 1], or from Γ(0, x) = E1(x)
    // for integer shapes: Γ(a, x) = (Γ(a + 1, x) - x^a e^-x) / a
    let mut value;
    let mut a;
    if s == s.round() {
        value = exp_integral_e1(x);
        a = 0.0;
    } else {
        a = s + (-s).floor() + 1.0;
        value = gamma_ui(a, x);
    }
    let emx = (-x).exp();
    while a - s > 0.5 {
        a -= 1.0;
        value = (value - x.powf(a) * emx) / a;
    }
    value.ln()
}

/// Continued fraction (modified Lentz), valid for any `s` once `x` is past the shape.
fn ln_upper_gamma_cf(s: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    -x + s * x.ln() + h.ln()
}

/// Exponential integral `E1(x)` for `0 < x < 1` by its power series.
fn exp_integral_e1(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}
