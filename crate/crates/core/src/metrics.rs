//! Localization and prediction scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::Vec2;

/// Displacements at or below this magnitude are excluded from MAPA.
pub const MAPA_EPS: f64 = 1e-6;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Degenerate(format!("length mismatch: {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::Degenerate("empty input".into()));
    }
    Ok(())
}

/// Mean Euclidean distance.
pub fn med(estimates: &[Vec2], truths: &[Vec2]) -> Result<f64> {
    check_lengths(estimates.len(), truths.len())?;
    let total: f64 = estimates.iter().zip(truths).map(|(e, t)| (*e - *t).norm()).sum();
    Ok(total / estimates.len() as f64)
}

/// Mean absolute error.
pub fn mae(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    check_lengths(estimates.len(), truths.len())?;
    let total: f64 = estimates.iter().zip(truths).map(|(e, t)| (e - t).abs()).sum();
    Ok(total / estimates.len() as f64)
}

/// Relative-error sums over eligible samples: `(sum |e - t| / |t|, eligible, excluded)`.
pub fn mapa_terms(estimates: &[f64], truths: &[f64]) -> Result<(f64, usize, usize)> {
    check_lengths(estimates.len(), truths.len())?;
    let mut sum = 0.0;
    let mut n = 0;
    for (e, t) in estimates.iter().zip(truths) {
        if t.abs() > MAPA_EPS {
            sum += (e - t).abs() / t.abs();
            n += 1;
        }
    }
    Ok((sum, n, estimates.len() - n))
}

/// Mean absolute percentage accuracy, `1 - mean(|e - t| / |t|)` over eligible samples.
pub fn mapa(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    let (sum, n, _) = mapa_terms(estimates, truths)?;
    if n == 0 {
        return Err(Error::UndefinedMetric("MAPA has no sample with nonzero displacement"));
    }
    Ok(1.0 - sum / n as f64)
}

/// MAPA pooled over several `(estimates, truths)` components; returns the score and the excluded count.
pub fn mapa_pooled(parts: &[(&[f64], &[f64])]) -> Result<(f64, usize)> {
    let (mut sum, mut n, mut excluded) = (0.0, 0, 0);
    for (e, t) in parts {
        let (s, k, x) = mapa_terms(e, t)?;
        sum += s;
        n += k;
        excluded += x;
    }
    if n == 0 {
        return Err(Error::UndefinedMetric("MAPA has no sample with nonzero displacement"));
    }
    Ok((1.0 - sum / n as f64, excluded))
}

/// Coefficient of determination.
pub fn r2(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    check_lengths(estimates.len(), truths.len())?;
    if truths.len() < 2 {
        return Err(Error::UndefinedMetric("R² needs at least two samples"));
    }
    let mean = truths.iter().sum::<f64>() / truths.len() as f64;
    let ss_tot: f64 = truths.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric("R² is undefined for a constant target"));
    }
    let ss_res: f64 = estimates.iter().zip(truths).map(|(e, t)| (e - t).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mapa: Option<f64>,
    pub r2: Option<f64>,
    pub mae: f64,
    pub n: usize,
    /// Samples left out of MAPA for having a near-zero target.
    pub mapa_excluded: usize,
}

impl MetricReport {
    /// Scores one prediction vector; undefined metrics become `None`.
    pub fn score(estimates: &[f64], truths: &[f64]) -> Result<Self> {
        let (sum, n_ok, excluded) = mapa_terms(estimates, truths)?;
        Ok(MetricReport {
            mapa: (n_ok > 0).then(|| 1.0 - sum / n_ok as f64),
            r2: r2(estimates, truths).ok(),
            mae: mae(estimates, truths)?,
            n: truths.len(),
            mapa_excluded: excluded,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn med_examples() {
        let z = [Vec2::ZERO];
        assert_eq!(med(&z, &z).unwrap(), 0.0);
        assert_eq!(med(&[Vec2::new(3.0, 4.0)], &z).unwrap(), 5.0);
        let est = [Vec2::new(1.0, 1.0), Vec2::new(3.0, 4.0)];
        let truth = [Vec2::new(1.0, 1.0), Vec2::ZERO];
        assert_eq!(med(&est, &truth).unwrap(), 2.5);
        assert!(med(&[], &[]).is_err());
    }

    #[test]
    fn mapa_examples() {
        assert_eq!(mapa(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(mapa(&[1.0], &[2.0]).unwrap(), 0.5);
        assert_eq!(mapa(&[-2.0], &[2.0]).unwrap(), -1.0);
        assert!(matches!(mapa(&[1.0], &[0.0]), Err(Error::UndefinedMetric(_))));
        let (sum, n, excluded) = mapa_terms(&[5.0, 1.0], &[0.0, 1.0]).unwrap();
        assert_eq!((sum, n, excluded), (0.0, 1, 1));
    }

    #[test]
    fn pooled_mapa_weights_samples_equally() {
        let (m, excl) = mapa_pooled(&[(&[0.0, 0.0], &[0.0, 0.0]), (&[1.0, 4.0], &[2.0, 4.0])]).unwrap();
        assert_eq!(m, 0.75);
        assert_eq!(excl, 2);
    }

    #[test]
    fn r2_examples() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(r2(&[1.0, 1.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(r2(&[1.0, 1.0], &[3.0, 3.0]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[0.0, 0.0], &[1.0, 3.0]).unwrap(), 2.0);
        assert_eq!(mae(&[1.0, 3.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(mae(&[4.0], &[4.0]).unwrap(), 0.0);
    }

    #[test]
    fn report_marks_undefined_metrics() {
        let r = MetricReport::score(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(r.mapa, None);
        assert_eq!(r.r2, None);
        assert_eq!(r.mapa_excluded, 2);
    }
}
