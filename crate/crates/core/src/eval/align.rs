//! Closed-form least-squares alignment of corresponding point sets.

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion, Vector3};
use thiserror::Error;

/// Relative singular-value floor below which a point set counts as
/// collinear.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AlignError {
    #[error("alignment needs at least 3 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("point sets have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("points are collinear or coincident")]
    Degenerate,
}

/// `p ↦ scale · R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Similarity {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros(), scale: 1.0 }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.scale + self.translation
    }

    /// Rigid part; the scale is dropped.
    pub fn isometry(&self) -> Isometry3<f64> {
        let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation));
        Isometry3::from_parts(Translation3::from(self.translation), rot)
    }
}

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

fn spread_rank_ok(m: &Matrix3<f64>) -> bool {
    let sv = m.singular_values();
    let mut s = [sv[0], sv[1], sv[2]];
    s.sort_by(|a, b| b.total_cmp(a));
    s[0] > 0.0 && s[1] > RANK_TOL * s[0]
}

/// Umeyama's method: the rotation, translation and (optionally) scale
/// minimizing `Σ‖reference_i − (s·R·estimate_i + t)‖²`.
pub fn umeyama_align(
    reference: &[Vector3<f64>],
    estimate: &[Vector3<f64>],
    with_scale: bool,
) -> Result<Similarity, AlignError> {
    if reference.len() != estimate.len() {
        return Err(AlignError::LengthMismatch(reference.len(), estimate.len()));
    }
    let n = reference.len();
    if n < 3 {
        return Err(AlignError::TooFewPairs(n));
    }
    let mu_r = centroid(reference);
    let mu_e = centroid(estimate);
    let mut cov = Matrix3::zeros();
    let mut spread_e = Matrix3::zeros();
    let mut var_e = 0.0;
    for (r, e) in reference.iter().zip(estimate) {
        let dr = r - mu_r;
        let de = e - mu_e;
        cov += dr * de.transpose();
        spread_e += de * de.transpose();
        var_e += de.norm_squared();
    }
    cov /= n as f64;
    var_e /= n as f64;
    if !spread_rank_ok(&spread_e) || !spread_rank_ok(&cov) {
        return Err(AlignError::Degenerate);
    }

    let svd = cov.svd(true, true);
    let u = svd.u.ok_or(AlignError::Degenerate)?;
    let v_t = svd.v_t.ok_or(AlignError::Degenerate)?;
    // A reflection is undone by flipping the axis of the smallest singular
    // value.
    let mut s = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        let (k, _) = svd.singular_values.argmin();
        s[(k, k)] = -1.0;
    }
    let rotation = u * s * v_t;
    let scale = if with_scale { (Matrix3::from_diagonal(&svd.singular_values) * s).trace() / var_e } else { 1.0 };
    let translation = mu_r - rotation * mu_e * scale;
    Ok(Similarity { rotation, translation, scale })
}
