//! Point-to-point ICP on a k-d tree.

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::{Isometry3, Point3, Vector3};
use thiserror::Error;

use super::align::{umeyama_align, AlignError};
use crate::model::PointCloudFrame;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum IcpError {
    #[error("{which} cloud is empty")]
    EmptyCloud { which: &'static str },
    #[error("only {found} correspondences within the gate, need {needed}")]
    TooFewCorrespondences { found: usize, needed: usize },
    #[error("index-true correspondences need equal sizes ({source_len} vs {target_len})")]
    SizeMismatch { source_len: usize, target_len: usize },
    #[error(transparent)]
    Alignment(#[from] AlignError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correspondence {
    NearestNeighbor,
    /// Source point `i` pairs with target point `i`; bypasses the search.
    IndexTrue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpConfig {
    pub max_iters: usize,
    /// Stop once the mean residual changes by less than this (meters).
    pub tol: f64,
    /// Pairs farther apart than this are rejected (meters).
    pub max_correspondence_dist: f64,
    pub min_correspondences: usize,
    pub correspondence: Correspondence,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-6,
            max_correspondence_dist: 1.0,
            min_correspondences: 10,
            correspondence: Correspondence::NearestNeighbor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpResult {
    /// Maps source coordinates into the target frame.
    pub transform: Isometry3<f64>,
    pub iterations: usize,
    /// Mean correspondence distance at the final estimate.
    pub mean_residual: f64,
    pub correspondences: usize,
}

fn positions(frame: &PointCloudFrame) -> Vec<Vector3<f64>> {
    frame.points.iter().map(|p| p.position).collect()
}

/// Registers `source` onto `target` starting from `init`.
pub fn icp_register(
    source: &PointCloudFrame,
    target: &PointCloudFrame,
    init: &Isometry3<f64>,
    max_iters: usize,
    tol: f64,
) -> Result<Isometry3<f64>, IcpError> {
    let cfg = IcpConfig { max_iters, tol, ..IcpConfig::default() };
    Ok(icp_register_with(source, target, init, &cfg)?.transform)
}

pub fn icp_register_with(
    source: &PointCloudFrame,
    target: &PointCloudFrame,
    init: &Isometry3<f64>,
    cfg: &IcpConfig,
) -> Result<IcpResult, IcpError> {
    if source.is_empty() {
        return Err(IcpError::EmptyCloud { which: "source" });
    }
    if target.is_empty() {
        return Err(IcpError::EmptyCloud { which: "target" });
    }
    let src = positions(source);
    let tgt = positions(target);
    if cfg.correspondence == Correspondence::IndexTrue && src.len() != tgt.len() {
        return Err(IcpError::SizeMismatch { source_len: src.len(), target_len: tgt.len() });
    }
    let entries: Vec<[f64; 3]> = tgt.iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree = match cfg.correspondence {
        Correspondence::NearestNeighbor => Some(ImmutableKdTree::<f64, 3>::new_from_slice(&entries).expect("nonempty target")),
        Correspondence::IndexTrue => None,
    };
    let gate_sq = cfg.max_correspondence_dist * cfg.max_correspondence_dist;
    let needed = cfg.min_correspondences.max(3);

    let mut transform = *init;
    let mut prev_mean: Option<f64> = None;
    let mut result = IcpResult { transform, iterations: 0, mean_residual: f64::INFINITY, correspondences: 0 };
    let mut moved = Vec::with_capacity(src.len());
    let mut matched = Vec::with_capacity(src.len());
    for iter in 0..cfg.max_iters.max(1) {
        moved.clear();
        matched.clear();
        let mut residual_sum = 0.0;
        for (i, p) in src.iter().enumerate() {
            let q = (transform * Point3::from(*p)).coords;
            let (j, d2) = match &tree {
                Some(tree) => {
                    let nn = tree.query(&[q.x, q.y, q.z]).nearest_one::<SquaredEuclidean<f64>>().execute();
                    (nn.item as usize, nn.distance)
                }
                None => (i, (tgt[i] - q).norm_squared()),
            };
            if d2 <= gate_sq {
                moved.push(q);
                matched.push(tgt[j]);
                residual_sum += d2.sqrt();
            }
        }
        if matched.len() < needed {
            return Err(IcpError::TooFewCorrespondences { found: matched.len(), needed });
        }
        let mean = residual_sum / matched.len() as f64;
        result = IcpResult { transform, iterations: iter, mean_residual: mean, correspondences: matched.len() };
        if prev_mean.is_some_and(|prev| (prev - mean).abs() < cfg.tol) {
            return Ok(result);
        }
        prev_mean = Some(mean);
        let step = umeyama_align(&matched, &moved, false)?;
        transform = step.isometry() * transform;
        result.transform = transform;
        result.iterations = iter + 1;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use nalgebra::{Translation3, UnitQuaternion};

    use super::*;
    use crate::eval::render::render_scan;
    use crate::eval::scene::generate_scene;
    use crate::eval::trajectory::Pose;
    use crate::io::detect::{ProfileClass, SensorProfile};
    use crate::io::schema::FieldSchema;

    fn scan() -> PointCloudFrame {
        let scene = generate_scene(4);
        let profile = SensorProfile::for_class(ProfileClass::Generic, FieldSchema::xyz_time());
        let pose = Pose { timestamp: 0.0, rotation: UnitQuaternion::identity(), translation: Vector3::new(0.0, 0.0, 1.2) };
        render_scan(&scene, &pose, &profile, 10.0)
    }

    fn moved(frame: &PointCloudFrame, t: &Isometry3<f64>) -> PointCloudFrame {
        let mut f = frame.clone();
        f.points.iter_mut().for_each(|p| p.position = (t * Point3::from(p.position)).coords);
        f
    }

    fn errors(a: &Isometry3<f64>, b: &Isometry3<f64>) -> (f64, f64) {
        let d = a.inverse() * b;
        (d.translation.vector.norm(), d.rotation.angle().to_degrees())
    }

    #[test]
    fn identical_clouds_give_identity() {
        let s = scan();
        let t = icp_register(&s, &s, &Isometry3::identity(), 30, 1e-9).unwrap();
        let (dt, dr) = errors(&t, &Isometry3::identity());
        assert!(dt < 1e-9 && dr.to_radians() < 1e-9, "{dt} {dr}");
    }

    #[test]
    fn recovers_small_motion() {
        let s = scan();
        let truth = Isometry3::from_parts(
            Translation3::new(0.15, -0.1, 0.05),
            UnitQuaternion::from_euler_angles(0.01, -0.02, 4f64.to_radians()),
        );
        let target = moved(&s, &truth);
        let cfg = IcpConfig { max_iters: 200, tol: 1e-12, ..IcpConfig::default() };
        let r = icp_register_with(&s, &target, &Isometry3::identity(), &cfg).unwrap();
        let (dt, dr) = errors(&r.transform, &truth);
        assert!(dt < 1e-3 && dr < 0.1, "{dt} m {dr} deg after {} iters", r.iterations);
    }

    #[test]
    fn index_true_is_exact() {
        let s = scan();
        let truth = Isometry3::from_parts(Translation3::new(2.0, 1.0, -0.5), UnitQuaternion::from_euler_angles(0.4, 0.2, 1.1));
        let target = moved(&s, &truth);
        let cfg = IcpConfig { correspondence: Correspondence::IndexTrue, max_correspondence_dist: f64::INFINITY, ..IcpConfig::default() };
        let r = icp_register_with(&s, &target, &Isometry3::identity(), &cfg).unwrap();
        let (dt, dr) = errors(&r.transform, &truth);
        assert!(dt < 1e-9 && dr.to_radians() < 1e-9, "{dt} {dr}");
    }

    #[test]
    fn disjoint_clouds_fail() {
        let s = scan();
        let far = moved(&s, &Isometry3::translation(500.0, 0.0, 0.0));
        assert!(matches!(
            icp_register(&s, &far, &Isometry3::identity(), 10, 1e-6),
            Err(IcpError::TooFewCorrespondences { found: 0, .. })
        ));
        let empty = PointCloudFrame::new(0, "e", 0.0, vec![]);
        assert!(matches!(icp_register(&s, &empty, &Isometry3::identity(), 10, 1e-6), Err(IcpError::EmptyCloud { .. })));
    }
}
