//! The degradation operators. Each takes a frame by value and returns the
//! degraded frame; survivors keep their order, time offsets and attributes.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rand::Rng;

use super::gaussian::BoxMuller;
use super::geometry::{azimuth, rotation_from_axis_angle, spherical_coords};
use super::imu::MotionEstimate;
use crate::model::{NoiseParams, OcclusionParams, PointCloudFrame, SectorParams, SectorStart};
use crate::seed::rng_from_seed;

/// Keeps each point independently with probability `1 - ratio`.
pub fn apply_dropout(mut frame: PointCloudFrame, ratio: f64, seed: u64) -> PointCloudFrame {
    if ratio <= 0.0 {
        return frame;
    }
    let keep = 1.0 - ratio;
    let mut rng = rng_from_seed(seed);
    frame.points.retain(|_| rng.random::<f64>() < keep);
    frame
}

/// Whether azimuth `theta` falls in the half-open sector
/// `[start, start + extent)`, wrapping at +-pi.
pub fn in_sector(theta: f64, start: f64, extent: f64) -> bool {
    (theta - start).rem_euclid(TAU) < extent
}

/// Resolves configured sector bounds to radians, drawing a random start
/// from `seed` when requested.
pub fn sector_radians(sector: &SectorParams, seed: u64) -> (f64, f64) {
    let start = match sector.start {
        SectorStart::Degrees(deg) => deg.to_radians(),
        SectorStart::Random => PI - TAU * rng_from_seed(seed).random::<f64>(),
    };
    (start, sector.extent_deg.to_radians())
}

/// Removes every point whose azimuth lies in `[start, start + extent)`.
pub fn apply_structured_dropout(mut frame: PointCloudFrame, start: f64, extent: f64) -> PointCloudFrame {
    if extent <= 0.0 {
        return frame;
    }
    frame.points.retain(|p| !in_sector(azimuth(&p.position), start, extent));
    frame
}

/// Keeps points with `|azimuth| <= max_azimuth` and
/// `|elevation| <= max_elevation`. Points at the origin are dropped.
pub fn apply_fov_reduction(mut frame: PointCloudFrame, max_azimuth: f64, max_elevation: f64) -> PointCloudFrame {
    if max_azimuth >= PI && max_elevation >= PI / 2.0 {
        return frame;
    }
    frame.points.retain(|p| match spherical_coords(&p.position) {
        Ok((theta, phi)) => theta.abs() <= max_azimuth && phi.abs() <= max_elevation,
        Err(_) => false,
    });
    frame
}

/// Samples `count` occlusion centers: direction uniform on the sphere
/// (normalized Gaussian), radius uniform on `[min_range, max_range]`.
pub fn occlusion_centers(count: usize, min_range: f64, max_range: f64, seed: u64) -> Vec<Vector3<f64>> {
    let mut gauss = BoxMuller::new(rng_from_seed(seed));
    let mut centers = Vec::with_capacity(count);
    while centers.len() < count {
        let dir = gauss.vector3(1.0);
        let norm = dir.norm();
        if norm < 1e-12 {
            continue;
        }
        let r = min_range + (max_range - min_range) * gauss.rng().random::<f64>();
        centers.push(dir * (r / norm));
    }
    centers
}

/// Keeps points strictly farther than `radius` from every center.
pub fn remove_spheres(mut frame: PointCloudFrame, centers: &[Vector3<f64>], radius: f64) -> PointCloudFrame {
    if centers.is_empty() {
        return frame;
    }
    frame
        .points
        .retain(|p| centers.iter().all(|c| (p.position - c).norm() > radius));
    frame
}

pub fn apply_occlusion(frame: PointCloudFrame, params: &OcclusionParams, seed: u64) -> PointCloudFrame {
    if params.patch_count == 0 {
        return frame;
    }
    let centers = occlusion_centers(params.patch_count, params.min_range, params.max_range, seed);
    remove_spheres(frame, &centers, params.patch_radius)
}

/// `p' = p + eps + o * eta` with `eps ~ N(0, sigma^2 I)`,
/// `o ~ Bernoulli(q)` and `eta ~ N(0, sigma_o^2 I)`.
pub fn apply_noise(mut frame: PointCloudFrame, params: &NoiseParams, seed: u64) -> PointCloudFrame {
    if params.sigma == 0.0 && params.outlier_prob == 0.0 {
        return frame;
    }
    let mut gauss = BoxMuller::new(rng_from_seed(seed));
    for p in &mut frame.points {
        let mut d = gauss.vector3(params.sigma);
        if gauss.rng().random::<f64>() < params.outlier_prob {
            d += gauss.vector3(params.outlier_sigma);
        }
        p.position += d;
    }
    frame
}

/// Forward warp `p' = R(w dt) p + v dt` with each point's own `dt`.
pub fn apply_motion_distortion(mut frame: PointCloudFrame, motion: &MotionEstimate) -> PointCloudFrame {
    if motion.linear_velocity == Vector3::zeros() && motion.angular_velocity == Vector3::zeros() {
        return frame;
    }
    for p in &mut frame.points {
        let dt = p.time_offset;
        let r = rotation_from_axis_angle(&(motion.angular_velocity * dt));
        p.position = r * p.position + motion.linear_velocity * dt;
    }
    frame
}

/// Keeps the points at indices `0, stride, 2 * stride, ...`.
pub fn apply_sparsification(mut frame: PointCloudFrame, stride: usize) -> PointCloudFrame {
    assert!(stride >= 1, "sparsify stride must be positive");
    if stride == 1 {
        return frame;
    }
    let mut i = 0;
    frame.points.retain(|_| {
        let keep = i % stride == 0;
        i += 1;
        keep
    });
    frame
}
