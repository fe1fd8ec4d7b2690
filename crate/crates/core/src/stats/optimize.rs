//! Box-constrained Nelder-Mead minimizer. Trial points are clamped into the box.

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

pub struct NelderMead<'a> {
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    /// Converged once the spread of objective values across the simplex falls below this.
    pub f_tol: f64,
    pub max_evaluations: usize,
}

impl NelderMead<'_> {
    fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, start: &[f64], step: &[f64]) -> Minimum {
        let dim = start.len();
        let mut evals = 0;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        let mut x0 = start.to_vec();
        self.clamp(&mut x0);
        let f0 = eval(&x0, &mut evals);
        simplex.push((x0.clone(), f0));
        for i in 0..dim {
            let mut xi = x0.clone();
            xi[i] += step[i];
            if xi[i] > self.upper[i] {
                xi[i] = x0[i] - step[i];
            }
            self.clamp(&mut xi);
            let fi = eval(&xi, &mut evals);
            simplex.push((xi, fi));
        }

        let mut converged = false;
        while evals < self.max_evaluations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (best, worst) = (simplex[0].1, simplex[dim].1);
            let spread = worst - best;
            if spread.is_finite() && spread <= self.f_tol {
                let size = simplex[1..]
                    .iter()
                    .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                    .fold(0.0, f64::max);
                if size <= 1e-7 || spread == 0.0 {
                    converged = true;
                    break;
                }
            }

            let mut centroid = vec![0.0; dim];
            for (x, _) in &simplex[..dim] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / dim as f64;
                }
            }
            let toward = |coef: f64, from: &[f64]| -> Vec<f64> {
                centroid.iter().zip(from).map(|(c, w)| c + coef * (w - c)).collect()
            };

            let mut xr = toward(-1.0, &simplex[dim].0);
            self.clamp(&mut xr);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let mut xe = toward(-2.0, &simplex[dim].0);
                self.clamp(&mut xe);
                let fe = eval(&xe, &mut evals);
                simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[dim - 1].1 {
                simplex[dim] = (xr, fr);
            } else {
                let (mut xc, outside) = if fr < simplex[dim].1 {
                    (toward(-0.5, &simplex[dim].0), true)
                } else {
                    (toward(0.5, &simplex[dim].0), false)
                };
                self.clamp(&mut xc);
                let fc = eval(&xc, &mut evals);
                let accept = if outside { fc <= fr } else { fc < simplex[dim].1 };
                if accept {
                    simplex[dim] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for (x, fx) in simplex.iter_mut().skip(1) {
                        for (v, b) in x.iter_mut().zip(&x_best) {
                            *v = b + 0.5 * (*v - b);
                        }
                        *fx = eval(x, &mut evals);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            evaluations: evals,
            converged,
        }
    }
}
