//! Absolute pose error statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::align::{umeyama_align, AlignError};
use super::trajectory::{associate, AssociationError, Trajectory};

/// Timestamp tolerance used when none is given.
pub const DEFAULT_MAX_DT: f64 = 0.01;

/// Summary of per-pose translation errors in meters. `std` is the
/// population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApeResult {
    pub mean: f64,
    pub std: f64,
    pub rmse: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ApeError {
    #[error(transparent)]
    Association(#[from] AssociationError),
    #[error("alignment failed: {0}")]
    Alignment(#[from] AlignError),
    #[error("no error samples")]
    Empty,
}

/// Statistics of a non-empty error sample.
pub fn ape_statistics(errors: &[f64]) -> Result<ApeResult, ApeError> {
    if errors.is_empty() {
        return Err(ApeError::Empty);
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
    Ok(ApeResult { mean, std: var.sqrt(), rmse, median, min: sorted[0], max: sorted[sorted.len() - 1] })
}

/// Per-pose translation errors after association and optional rigid
/// alignment of `estimate` onto `reference`.
pub fn ape_errors(reference: &Trajectory, estimate: &Trajectory, align: bool, max_dt: f64) -> Result<Vec<f64>, ApeError> {
    let pairs = associate(reference, estimate, max_dt)?;
    let refs: Vec<_> = pairs.iter().map(|(r, _)| r.translation).collect();
    let mut ests: Vec<_> = pairs.iter().map(|(_, e)| e.translation).collect();
    if align {
        let t = umeyama_align(&refs, &ests, false)?;
        ests.iter_mut().for_each(|e| *e = t.apply(e));
    }
    Ok(refs.iter().zip(&ests).map(|(r, e)| (r - e).norm()).collect())
}

pub fn compute_ape(reference: &Trajectory, estimate: &Trajectory, align: bool, max_dt: f64) -> Result<ApeResult, ApeError> {
    ape_statistics(&ape_errors(reference, estimate, align, max_dt)?)
}

#[cfg(test)]
mod tests {
    use nalgebra::{UnitQuaternion, Vector3};

    use super::*;
    use crate::eval::trajectory::Pose;

    fn curve(offset: Vector3<f64>) -> Trajectory {
        Trajectory::new(
            (0..30)
                .map(|i| {
                    let s = i as f64 * 0.2;
                    Pose {
                        timestamp: i as f64 * 0.1,
                        rotation: UnitQuaternion::from_euler_angles(0.0, 0.0, s),
                        translation: Vector3::new(3.0 * s.cos(), 2.0 * s.sin(), 0.1 * s) + offset,
                    }
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn self_ape_is_zero() {
        let t = curve(Vector3::zeros());
        let r = compute_ape(&t, &t, false, DEFAULT_MAX_DT).unwrap();
        assert_eq!(r, ApeResult { mean: 0.0, std: 0.0, rmse: 0.0, median: 0.0, min: 0.0, max: 0.0 });
    }

    #[test]
    fn constant_offset() {
        let a = curve(Vector3::zeros());
        let b = curve(Vector3::new(1.0, 0.0, 0.0));
        let r = compute_ape(&a, &b, false, DEFAULT_MAX_DT).unwrap();
        assert!((r.mean - 1.0).abs() < 1e-12);
        assert!(r.std < 1e-12);
        let r = compute_ape(&a, &b, true, DEFAULT_MAX_DT).unwrap();
        assert!(r.mean <= 1e-9);
    }

    #[test]
    fn statistics_of_known_sample() {
        let r = ape_statistics(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(r.mean, 2.5);
        assert_eq!(r.median, 2.5);
        assert_eq!((r.min, r.max), (1.0, 4.0));
        assert!((r.std - 1.25f64.sqrt()).abs() < 1e-15);
        assert!((r.rmse * r.rmse - (r.mean * r.mean + r.std * r.std)).abs() < 1e-9);
        assert_eq!(ape_statistics(&[]), Err(ApeError::Empty));
    }
}
