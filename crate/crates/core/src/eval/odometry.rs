//! Frame-to-frame ICP odometry.

use nalgebra::Isometry3;
use thiserror::Error;

use super::icp::{icp_register_with, IcpConfig, IcpError};
use super::trajectory::{Pose, Trajectory, TrajectoryError};
use crate::model::PointCloudFrame;

#[derive(Debug, Error)]
pub enum OdometryError {
    #[error("odometry needs at least 2 scans, got {0}")]
    TooFewScans(usize),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdometryFailure {
    /// Index of the scan that could not be registered.
    pub frame: usize,
    pub error: IcpError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdometryRun {
    /// One pose per registered scan, starting at identity.
    pub trajectory: Trajectory,
    pub failure: Option<OdometryFailure>,
}

pub fn run_odometry(scans: &[PointCloudFrame]) -> Result<OdometryRun, OdometryError> {
    run_odometry_with(scans, &IcpConfig::default())
}

/// Chains ICP between consecutive scans. Each registration starts from the
/// previous relative motion. A failed registration at scan `k` ends the
/// trajectory after `k` poses and is reported in `failure`.
pub fn run_odometry_with(scans: &[PointCloudFrame], cfg: &IcpConfig) -> Result<OdometryRun, OdometryError> {
    if scans.len() < 2 {
        return Err(OdometryError::TooFewScans(scans.len()));
    }
    let mut poses = vec![Pose::identity(scans[0].t0)];
    let mut pose = Isometry3::identity();
    let mut relative = Isometry3::identity();
    let mut failure = None;
    for k in 1..scans.len() {
        match icp_register_with(&scans[k], &scans[k - 1], &relative, cfg) {
            Ok(r) => {
                relative = r.transform;
                pose *= relative;
                poses.push(Pose::from_isometry(scans[k].t0, &pose));
            }
            Err(error) => {
                failure = Some(OdometryFailure { frame: k, error });
                break;
            }
        }
    }
    Ok(OdometryRun { trajectory: Trajectory::new(poses)?, failure })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::icp::IcpError;
    use crate::eval::render::render_scan;
    use crate::eval::scene::generate_scene;
    use crate::io::detect::{ProfileClass, SensorProfile};
    use crate::io::schema::FieldSchema;
    use nalgebra::{UnitQuaternion, Vector3};

    fn static_scans(n: usize) -> Vec<PointCloudFrame> {
        let scene = generate_scene(11);
        let profile = SensorProfile::for_class(ProfileClass::Generic, FieldSchema::xyz_time());
        let pose = Pose { timestamp: 0.0, rotation: UnitQuaternion::identity(), translation: Vector3::new(0.0, 0.0, 1.2) };
        let scan = render_scan(&scene, &pose, &profile, 10.0);
        (0..n)
            .map(|k| {
                let mut s = scan.clone();
                s.frame_index = k as u64;
                s.t0 = k as f64 * 0.1;
                s
            })
            .collect()
    }

    #[test]
    fn static_sequence_stays_at_identity() {
        let run = run_odometry(&static_scans(5)).unwrap();
        assert!(run.failure.is_none());
        assert_eq!(run.trajectory.len(), 5);
        for p in run.trajectory.poses() {
            assert!(p.translation.norm() < 1e-6);
            assert!(p.rotation.angle() < 1e-6);
        }
    }

    #[test]
    fn empty_frame_truncates() {
        let mut scans = static_scans(5);
        scans[3].points.clear();
        let run = run_odometry(&scans).unwrap();
        assert_eq!(run.trajectory.len(), 3);
        let failure = run.failure.unwrap();
        assert_eq!(failure.frame, 3);
        assert_eq!(failure.error, IcpError::EmptyCloud { which: "source" });
    }

    #[test]
    fn needs_two_scans() {
        assert!(matches!(run_odometry(&static_scans(1)), Err(OdometryError::TooFewScans(1))));
    }
}
