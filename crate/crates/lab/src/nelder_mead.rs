//! Derivative-free minimization (Nelder-Mead simplex) for fitting
//! half-space parameters to noisy objectives.

/// Result of a simplex minimization.
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: u64,
}

/// Standard Nelder-Mead with adaptive-free fixed coefficients. Starts from
/// `x0` with an axis-aligned simplex of the given `scale`, stops when the
/// simplex diameter drops below `diam_tol` or the evaluation budget is
/// spent.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scale: f64,
    budget: u64,
    diam_tol: f64,
) -> Minimum {
    let n = x0.len();
    assert!(n >= 1);
    let mut evals = 0u64;
    let mut eval = |p: &[f64], evals: &mut u64| {
        *evals += 1;
        let v = f(p);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // initial simplex
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += if p[i].abs() > 1.0 {
            scale * p[i].abs()
        } else {
            scale
        };
        let v = eval(&p, &mut evals);
        simplex.push((p, v));
    }

    let (alpha, gamma, beta, sigma) = (1.0, 2.0, 0.5, 0.5);
    while evals < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diam = simplex[1..]
            .iter()
            .map(|(p, _)| {
                p.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0f64, f64::max);
        if diam < diam_tol {
            break;
        }
        // centroid of all but the worst
        let mut c = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += pi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let refl: Vec<f64> = c
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let fr = eval(&refl, &mut evals);
        if fr < simplex[0].1 {
            let exp: Vec<f64> = c
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + gamma * (c - w))
                .collect();
            let fe = eval(&exp, &mut evals);
            simplex[n] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (refl, fr);
        } else {
            let contr: Vec<f64> = c
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + beta * (w - c))
                .collect();
            let fc = eval(&contr, &mut evals);
            if fc < worst.1 {
                simplex[n] = (contr, fc);
            } else {
                // shrink toward the best
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = best
                        .iter()
                        .zip(&entry.0)
                        .map(|(b, p)| b + sigma * (p - b))
                        .collect();
                    let v = eval(&p, &mut evals);
                    *entry = (p, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Minimum {
        x: simplex[0].0.clone(),
        value: simplex[0].1,
        evals,
    }
}

/// Run `minimize` from `x0` plus `restarts` perturbed starts, keeping the
/// best. Perturbations are deterministic axis offsets scaled by `scale`.
pub fn minimize_restarts<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scale: f64,
    budget: u64,
    diam_tol: f64,
    restarts: usize,
) -> Minimum {
    let mut best = minimize(&mut f, x0, scale, budget, diam_tol);
    for r in 0..restarts {
        let mut start = best.x.clone();
        for (i, s) in start.iter_mut().enumerate() {
            let sign = if (i + r) % 2 == 0 { 1.0 } else { -1.0 };
            *s += sign * scale * (1.0 + r as f64);
        }
        let m = minimize(&mut f, &start, scale, budget, diam_tol);
        if m.value < best.value {
            best = m;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let m = minimize(
            |p| (p[0] - 3.0).powi(2) + 2.0 * (p[1] + 1.0).powi(2),
            &[0.0, 0.0],
            0.5,
            2000,
            1e-6,
        );
        assert!((m.x[0] - 3.0).abs() < 1e-4, "{m:?}");
        assert!((m.x[1] + 1.0).abs() < 1e-4, "{m:?}");
    }

    #[test]
    fn minimizes_rosenbrock_with_restarts() {
        let rosen =
            |p: &[f64]| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2);
        let m = minimize_restarts(rosen, &[-1.2, 1.0], 0.5, 4000, 1e-9, 3);
        assert!(m.value < 1e-6, "{m:?}");
    }

    #[test]
    fn nan_objective_is_rejected_not_propagated() {
        let m = minimize(
            |p| {
                if p[0] < 0.0 {
                    f64::NAN
                } else {
                    (p[0] - 1.0).powi(2)
                }
            },
            &[2.0, 0.0],
            0.5,
            1000,
            1e-6,
        );
        assert!((m.x[0] - 1.0).abs() < 1e-3);
        assert!(m.value.is_finite());
    }
}
