use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Rotation vectors shorter than this use the first-order rotation.
pub const SMALL_ANGLE: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
#[error("point at the sensor origin has no direction")]
pub struct ZeroNorm;

/// Azimuth `atan2(y, x)` in (-pi, pi] and elevation `asin(z / |p|)` in
/// [-pi/2, pi/2].
pub fn spherical_coords(p: &Vector3<f64>) -> Result<(f64, f64), ZeroNorm> {
    let norm = p.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(ZeroNorm);
    }
    Ok((azimuth(p), (p.z / norm).clamp(-1.0, 1.0).asin()))
}

/// `atan2(y, x)` folded into (-pi, pi].
pub fn azimuth(p: &Vector3<f64>) -> f64 {
    let theta = p.y.atan2(p.x);
    if theta == -PI {
        PI
    } else {
        theta
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `I + [aa]x` for `|aa| < 0.1`, otherwise the exact Rodrigues rotation.
pub fn rotation_from_axis_angle(aa: &Vector3<f64>) -> Matrix3<f64> {
    if aa.norm() < SMALL_ANGLE {
        Matrix3::identity() + skew(aa)
    } else {
        rodrigues(aa)
    }
}

/// Exact exponential map of a rotation vector.
pub fn rodrigues(aa: &Vector3<f64>) -> Matrix3<f64> {
    let theta = aa.norm();
    if theta == 0.0 {
        return Matrix3::identity();
    }
    let axis = aa / theta;
    let k = skew(&axis);
    let (s, c) = theta.sin_cos();
    // cos(t) I + sin(t) K + (1 - cos(t)) a a^T
    Matrix3::identity() * c + k * s + axis * axis.transpose() * (1.0 - c)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn spherical_examples() {
        assert_eq!(spherical_coords(&Vector3::new(1.0, 0.0, 0.0)).unwrap(), (0.0, 0.0));
        let (t, p) = spherical_coords(&Vector3::new(0.0, 1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(t, FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(p, 0.0);
        let (t, p) = spherical_coords(&Vector3::new(1.0, 1.0, SQRT_2)).unwrap();
        assert_abs_diff_eq!(t, FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(p, FRAC_PI_4, epsilon = 1e-15);
        assert_eq!(spherical_coords(&Vector3::zeros()), Err(ZeroNorm));
    }

    #[test]
    fn azimuth_never_returns_minus_pi() {
        assert_eq!(azimuth(&Vector3::new(-1.0, -0.0, 0.0)), PI);
    }

    #[test]
    fn elevation_clamped_for_vertical_points() {
        let (_, p) = spherical_coords(&Vector3::new(0.0, 0.0, -3.0)).unwrap();
        assert_eq!(p, -FRAC_PI_2);
    }

    #[test]
    fn zero_rotation_is_identity() {
        assert_eq!(rotation_from_axis_angle(&Vector3::zeros()), Matrix3::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = rotation_from_axis_angle(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        let v = r * Vector3::new(1.0, 0.0, 0.0);
        assert_abs_diff_eq!(v, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn small_angle_branch_is_first_order() {
        let aa = Vector3::new(0.0, 0.03, 0.0);
        assert_eq!(rotation_from_axis_angle(&aa), Matrix3::identity() + skew(&aa));
    }
}
