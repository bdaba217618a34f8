//! Timestamped poses, TUM text files and timestamp association.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    /// Seconds.
    pub timestamp: f64,
    pub rotation: UnitQuaternion<f64>,
    /// Meters.
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity(timestamp: f64) -> Self {
        Self { timestamp, rotation: UnitQuaternion::identity(), translation: Vector3::zeros() }
    }

    pub fn from_isometry(timestamp: f64, iso: &Isometry3<f64>) -> Self {
        Self { timestamp, rotation: iso.rotation, translation: iso.translation.vector }
    }

    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.translation), self.rotation)
    }
}

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("trajectory has no poses")]
    Empty,
    #[error("timestamps must be strictly increasing (pose {index})")]
    NotIncreasing { index: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum AssociationError {
    #[error("max_dt must be positive, got {0}")]
    InvalidMaxDt(f64),
    #[error("no estimated pose lies within {max_dt} s of a reference pose")]
    NoPairs { max_dt: f64 },
}

/// Non-empty pose sequence with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose>) -> Result<Self, TrajectoryError> {
        if poses.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        if let Some(i) = poses.windows(2).position(|w| !(w[1].timestamp > w[0].timestamp)) {
            return Err(TrajectoryError::NotIncreasing { index: i + 1 });
        }
        Ok(Self { poses })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.poses.iter().map(|p| p.translation).collect()
    }

    /// Applies `t` on the left of every pose.
    pub fn transformed(&self, t: &Isometry3<f64>) -> Self {
        let poses = self.poses.iter().map(|p| Pose::from_isometry(p.timestamp, &(t * p.isometry()))).collect();
        Self { poses }
    }

    /// Parses `timestamp tx ty tz qx qy qz qw` lines; blank lines and `#`
    /// comments are skipped.
    pub fn parse_tum(text: &str) -> Result<Self, TrajectoryError> {
        let mut poses = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| TrajectoryError::Parse { line: i + 1, message };
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|tok| tok.parse::<f64>().map_err(|_| err(format!("`{tok}` is not a number"))))
                .collect::<Result<_, _>>()?;
            if v.len() != 8 {
                return Err(err(format!("expected 8 values, found {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(err("non-finite value".into()));
            }
            let q = Quaternion::new(v[7], v[4], v[5], v[6]);
            if q.norm() < 1e-12 {
                return Err(err("zero quaternion".into()));
            }
            poses.push(Pose {
                timestamp: v[0],
                rotation: UnitQuaternion::from_quaternion(q),
                translation: Vector3::new(v[1], v[2], v[3]),
            });
        }
        let traj = Self::new(poses)?;
        Ok(traj)
    }

    pub fn read_tum(path: impl AsRef<Path>) -> Result<Self, TrajectoryError> {
        Self::parse_tum(&std::fs::read_to_string(path)?)
    }

    pub fn to_tum_string(&self) -> String {
        let mut out = String::new();
        for p in &self.poses {
            let q = p.rotation.quaternion();
            let t = p.translation;
            writeln!(out, "{} {} {} {} {} {} {} {}", p.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w).unwrap();
        }
        out
    }

    pub fn write_tum(&self, path: impl AsRef<Path>) -> Result<(), TrajectoryError> {
        Ok(std::fs::write(path, self.to_tum_string())?)
    }
}

/// Pairs each estimated pose with the nearest-in-time reference pose no
/// more than `max_dt` away. Ties go to the earlier reference pose. Pairs
/// are returned as `(reference, estimate)` in estimate order.
pub fn associate(reference: &Trajectory, estimate: &Trajectory, max_dt: f64) -> Result<Vec<(Pose, Pose)>, AssociationError> {
    if !(max_dt > 0.0) {
        return Err(AssociationError::InvalidMaxDt(max_dt));
    }
    let refs = reference.poses();
    let mut pairs = Vec::new();
    for est in estimate.poses() {
        let k = refs.partition_point(|r| r.timestamp < est.timestamp);
        let candidates = [k.checked_sub(1), (k < refs.len()).then_some(k)];
        let best = candidates
            .into_iter()
            .flatten()
            .map(|i| (i, (refs[i].timestamp - est.timestamp).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((i, dt)) = best {
            if dt <= max_dt {
                pairs.push((refs[i], *est));
            }
        }
    }
    if pairs.is_empty() {
        return Err(AssociationError::NoPairs { max_dt });
    }
    Ok(pairs)
}
