//! Constant-velocity motion estimates from IMU buffers.

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Absolute time in seconds.
    pub timestamp: f64,
    pub angular_velocity: Vector3<f64>,
    pub linear_acceleration: Vector3<f64>,
}

/// Linear velocity (m/s) and angular velocity (rad/s) held constant over a
/// scan.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotionEstimate {
    pub linear_velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ImuError {
    #[error("IMU buffer does not cover [{t0}, {t1}]")]
    Coverage { t0: f64, t1: f64 },
    #[error("integration window [{t0}, {t1}] is empty")]
    EmptyWindow { t0: f64, t1: f64 },
    #[error("IMU timestamps must be strictly increasing (sample {index})")]
    Unsorted { index: usize },
}

fn lerp(a: &ImuSample, b: &ImuSample, t: f64) -> (Vector3<f64>, Vector3<f64>) {
    let w = (t - a.timestamp) / (b.timestamp - a.timestamp);
    (
        a.angular_velocity.lerp(&b.angular_velocity, w),
        a.linear_acceleration.lerp(&b.linear_acceleration, w),
    )
}

/// Integrates the buffer over `[t0, t1]` with the trapezoidal rule.
///
/// The velocity is `v0` plus the integral of linear acceleration; the
/// angular velocity is the time-weighted mean of the gyro signal. Window
/// endpoints are linearly interpolated between the bracketing samples.
pub fn estimate_velocity(imu: &[ImuSample], t0: f64, t1: f64, v0: Vector3<f64>) -> Result<MotionEstimate, ImuError> {
    if !(t1 > t0) {
        return Err(ImuError::EmptyWindow { t0, t1 });
    }
    if let Some(i) = imu.windows(2).position(|w| !(w[1].timestamp > w[0].timestamp)) {
        return Err(ImuError::Unsorted { index: i + 1 });
    }
    let covered = matches!((imu.first(), imu.last()), (Some(a), Some(b)) if a.timestamp <= t0 && b.timestamp >= t1);
    if !covered {
        return Err(ImuError::Coverage { t0, t1 });
    }

    // Piecewise-linear knots over the window.
    let mut knots: Vec<(f64, Vector3<f64>, Vector3<f64>)> = Vec::new();
    let value_at = |t: f64| {
        let k = imu.partition_point(|s| s.timestamp <= t);
        if k == 0 {
            (imu[0].angular_velocity, imu[0].linear_acceleration)
        } else if k == imu.len() || imu[k - 1].timestamp == t {
            (imu[k - 1].angular_velocity, imu[k - 1].linear_acceleration)
        } else {
            lerp(&imu[k - 1], &imu[k], t)
        }
    };
    let (w0, a0) = value_at(t0);
    knots.push((t0, w0, a0));
    for s in imu.iter().filter(|s| s.timestamp > t0 && s.timestamp < t1) {
        knots.push((s.timestamp, s.angular_velocity, s.linear_acceleration));
    }
    let (w1, a1) = value_at(t1);
    knots.push((t1, w1, a1));

    let mut dv = Vector3::zeros();
    let mut rot = Vector3::zeros();
    for pair in knots.windows(2) {
        let (ta, wa, aa) = pair[0];
        let (tb, wb, ab) = pair[1];
        let h = tb - ta;
        dv += (aa + ab) * (0.5 * h);
        rot += (wa + wb) * (0.5 * h);
    }
    Ok(MotionEstimate { linear_velocity: v0 + dv, angular_velocity: rot / (t1 - t0) })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn sample(t: f64, w: [f64; 3], a: [f64; 3]) -> ImuSample {
        ImuSample { timestamp: t, angular_velocity: Vector3::from(w), linear_acceleration: Vector3::from(a) }
    }

    #[test]
    fn constant_acceleration() {
        let buf: Vec<_> = (0..=20).map(|i| sample(i as f64 * 0.01, [0.0; 3], [1.0, 0.0, 0.0])).collect();
        let m = estimate_velocity(&buf, 0.05, 0.15, Vector3::zeros()).unwrap();
        assert_abs_diff_eq!(m.linear_velocity, Vector3::new(0.1, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn constant_gyro_passes_through() {
        let buf: Vec<_> = (0..=10).map(|i| sample(i as f64 * 0.02, [0.0, 0.0, 0.5], [0.0; 3])).collect();
        let v0 = Vector3::new(0.3, -0.1, 0.0);
        let m = estimate_velocity(&buf, 0.013, 0.171, v0).unwrap();
        assert_eq!(m.linear_velocity, v0);
        assert_abs_diff_eq!(m.angular_velocity, Vector3::new(0.0, 0.0, 0.5), epsilon = 1e-15);
    }

    #[test]
    fn coverage_errors() {
        let buf = vec![sample(1.0, [0.0; 3], [0.0; 3]), sample(2.0, [0.0; 3], [0.0; 3])];
        assert!(matches!(estimate_velocity(&[], 0.0, 1.0, Vector3::zeros()), Err(ImuError::Coverage { .. })));
        assert!(matches!(estimate_velocity(&buf, 0.5, 1.5, Vector3::zeros()), Err(ImuError::Coverage { .. })));
        assert!(matches!(estimate_velocity(&buf, 1.5, 2.5, Vector3::zeros()), Err(ImuError::Coverage { .. })));
        assert!(matches!(estimate_velocity(&buf, 1.5, 1.5, Vector3::zeros()), Err(ImuError::EmptyWindow { .. })));
    }
}
