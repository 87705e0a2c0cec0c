use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `y = intercept + Σ weights[j]·x[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

struct Standardized {
    z: DMatrix<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
    /// Columns with nonzero variance.
    active: Vec<usize>,
    y_mean: f64,
    yc: DVector<f64>,
}

fn standardize(x: &[Vec<f64>], y: &[f64]) -> Result<Standardized> {
    let n = x.len();
    if n == 0 || n != y.len() {
        return Err(Error::Degenerate("rows and targets differ in length or are empty".into()));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::FeatureMismatch("ragged feature rows".into()));
    }
    if n < p + 1 {
        return Err(Error::Degenerate(format!("{n} rows cannot determine {p} weights and an intercept")));
    }
    let mut means = vec![0.0; p];
    let mut scales = vec![0.0; p];
    for j in 0..p {
        let m = x.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n as f64;
        means[j] = m;
        scales[j] = var.sqrt();
    }
    // a constant column is absorbed by the intercept
    let active: Vec<usize> = (0..p).filter(|&j| scales[j] > 1e-12 * means[j].abs().max(1.0)).collect();
    let z = DMatrix::from_fn(n, active.len(), |i, k| {
        let j = active[k];
        (x[i][j] - means[j]) / scales[j]
    });
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    Ok(Standardized {
        z,
        means,
        scales,
        active,
        y_mean,
        yc,
    })
}

fn solve(s: &Standardized, lambda: f64, p: usize) -> Result<LinearModel> {
    let k = s.active.len();
    let mut gram = s.z.transpose() * &s.z;
    for i in 0..k {
        gram[(i, i)] += lambda;
    }
    let rhs = s.z.transpose() * &s.yc;
    if k > 0 {
        let sv = gram.clone().singular_values();
        let (lo, hi) = (sv.min(), sv.max());
        if !(lo > 1e-12 * hi) {
            return Err(Error::Singular);
        }
    }
    let w = if k == 0 {
        DVector::zeros(0)
    } else {
        gram.cholesky().ok_or(Error::Singular)?.solve(&rhs)
    };
    let mut weights = vec![0.0; p];
    let mut intercept = s.y_mean;
    for (idx, &j) in s.active.iter().enumerate() {
        weights[j] = w[idx] / s.scales[j];
        intercept -= weights[j] * s.means[j];
    }
    Ok(LinearModel { weights, intercept })
}

/// Ordinary least squares with an intercept.
pub fn fit_linear(x: &[Vec<f64>], y: &[f64]) -> Result<LinearModel> {
    let s = standardize(x, y)?;
    solve(&s, 0.0, x[0].len())
}

/// Ridge regression on z-scored features with an unpenalized intercept.
pub fn fit_ridge(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LinearModel> {
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("ridge lambda must be non-negative, got {lambda}")));
    }
    let s = standardize(x, y)?;
    solve(&s, lambda, x[0].len())
}
