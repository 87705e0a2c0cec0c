//! Derivative-free refinement of the numeric constants in a tree.

use super::expr::{Columns, Expr};
use crate::metrics::mae;

/// Minimizes `f` from `x0` with the Nelder–Mead simplex method.
///
/// Returns the best point seen and its value; the result is never worse than `x0`.
pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], max_iter: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let f0 = f(x0);
    if n == 0 || max_iter == 0 {
        return (x0.to_vec(), f0);
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] = if x[i] != 0.0 { x[i] * 1.25 } else { 0.25 };
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let key = |v: f64| if v.is_nan() { f64::INFINITY } else { v };

    for _ in 0..max_iter {
        simplex.sort_by(|a, b| key(a.1).total_cmp(&key(b.1)));
        let (best, worst) = (key(simplex[0].1), key(simplex[n].1));
        if (worst - best).abs() <= 1e-15 * best.abs().max(1e-300) {
            let spread = simplex
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= 1e-14 * simplex[0].0.iter().fold(1.0f64, |m, v| m.max(v.abs())) {
                break;
            }
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = f(&xr);
        if key(fr) < best {
            let xe = along(2.0);
            let fe = f(&xe);
            simplex[n] = if key(fe) < key(fr) { (xe, fe) } else { (xr, fr) };
        } else if key(fr) < key(simplex[n - 1].1) {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if key(fr) < worst {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if key(fc) < key(fr).min(worst) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (x, fx) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&x_best) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    *fx = f(x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| key(a.1).total_cmp(&key(b.1)));
    let (x, fx) = simplex.swap_remove(0);
    if key(fx) < key(f0) {
        (x, fx)
    } else {
        (x0.to_vec(), f0)
    }
}

/// Jointly refines the constants of `e` to minimize MAE on `data`.
///
/// Restarts from the incumbent while iterations remain; never increases MAE.
pub fn tune_constants(e: &Expr, data: &Columns, target: &[f64], max_iter: usize) -> Expr {
    let c0 = e.constants();
    if c0.is_empty() || max_iter == 0 || e.eval_columns(data).is_err() {
        return e.clone();
    }
    let objective = |c: &[f64]| {
        if c.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        mae(&e.eval_substituted(data, c), target).unwrap_or(f64::INFINITY)
    };
    let mut best = c0;
    let mut best_val = objective(&best);
    let mut budget = max_iter;
    while budget > 0 {
        let rounds = budget.min(max_iter.max(50) / 2).max(1);
        let (x, fx) = nelder_mead(objective, &best, rounds);
        budget -= rounds;
        let improved = fx < best_val;
        if improved {
            best = x;
            best_val = fx;
        }
        if !improved || best_val == 0.0 {
            break;
        }
    }
    e.with_constants(&best)
}
