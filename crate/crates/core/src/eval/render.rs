//! Noise-free raycast scans of a [`Scene`].

use super::scene::Scene;
use super::trajectory::Pose;
use crate::engine::geometry::spherical_coords;
use crate::io::detect::SensorProfile;
use crate::model::{AttributeSet, Point, PointCloudFrame};

/// Returns farther than this are discarded.
pub const MAX_RANGE: f64 = 100.0;
/// Elevation channels reported in `ring`.
pub const RING_COUNT: u16 = 16;
/// A sample counts as visible when the first hit along its ray is no
/// closer than this to the sample itself.
const VISIBILITY_TOL: f64 = 1e-6;

/// Visible scene samples from `pose`, in the sensor frame.
///
/// A sample is returned when its azimuth and elevation fall inside the
/// profile's nominal field of view, its surface faces the sensor and no
/// other surface blocks the line of sight. Points are ordered by azimuth;
/// time offsets grow linearly with azimuth across one period `1 / rate`.
/// Intensity falls off with squared range and `ring` is the elevation
/// channel.
pub fn render_scan(scene: &Scene, pose: &Pose, profile: &SensorProfile, rate: f64) -> PointCloudFrame {
    let period = 1.0 / rate;
    let half_span = 0.5 * profile.nominal_azimuth_span.to_radians();
    let (lo, hi) = (profile.vertical_fov.0.to_radians(), profile.vertical_fov.1.to_radians());
    let inv = pose.rotation.inverse();
    let mut hits: Vec<(f64, Point)> = Vec::new();
    for s in &scene.samples {
        let ray = s.position - pose.translation;
        let range = ray.norm();
        if !(range > 0.0 && range <= MAX_RANGE) || s.normal.dot(&ray) >= 0.0 {
            continue;
        }
        let local = inv * ray;
        let Ok((azimuth, elevation)) = spherical_coords(&local) else { continue };
        if azimuth.abs() > half_span || elevation < lo || elevation > hi {
            continue;
        }
        if scene.raycast(&pose.translation, &(ray / range)) < range - VISIBILITY_TOL {
            continue;
        }
        let channel = ((elevation - lo) / (hi - lo) * RING_COUNT as f64).floor().min((RING_COUNT - 1) as f64);
        let sweep = if half_span > 0.0 { (azimuth + half_span) / (2.0 * half_span) } else { 0.0 };
        hits.push((
            sweep,
            Point {
                position: local,
                time_offset: period * sweep.min(1.0),
                attributes: AttributeSet {
                    intensity: Some(1000.0 / (1.0 + range * range)),
                    reflectivity: None,
                    ring: Some(channel as u16),
                    extra: Vec::new(),
                },
            },
        ));
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut frame = PointCloudFrame::new(0, "synthetic", pose.timestamp, hits.into_iter().map(|(_, p)| p).collect());
    frame.schema = profile.field_schema.clone();
    frame
}

#[cfg(test)]
mod tests {
    use nalgebra::{UnitQuaternion, Vector3};

    use super::*;

    use crate::eval::scene::generate_scene;
    use crate::io::detect::ProfileClass;
    use crate::io::schema::FieldSchema;

    fn pose() -> Pose {
        Pose { timestamp: 2.0, rotation: UnitQuaternion::from_euler_angles(0.0, 0.0, 0.3), translation: Vector3::new(0.5, 0.2, 1.2) }
    }

    #[test]
    fn inside_room_is_nonempty_and_exact() {
        let scene = generate_scene(1);
        let profile = SensorProfile::for_class(ProfileClass::Generic, FieldSchema::xyz_time());
        let f = render_scan(&scene, &pose(), &profile, 10.0);
        assert!(f.len() > 1000);
        assert_eq!(f.t0, 2.0);
        let rot = pose().rotation;
        for p in &f.points {
            let world = rot * p.position + pose().translation;
            assert!(scene.on_surface(&world, 1e-9));
            assert!((p.position.norm() - (world - pose().translation).norm()).abs() < 1e-9);
            let truth = scene.raycast(&pose().translation, &(rot * p.position.normalize()));
            assert!((p.position.norm() - truth).abs() < 1e-6);
            assert!(p.time_offset >= 0.0 && p.time_offset <= 0.1);
        }
    }

    #[test]
    fn points_within_profile_fov() {
        let scene = generate_scene(2);
        for class in [ProfileClass::LivoxAviaLike, ProfileClass::LivoxMid360Like, ProfileClass::OusterLike] {
            let profile = SensorProfile::for_class(class, FieldSchema::xyz_time());
            let f = render_scan(&scene, &pose(), &profile, 10.0);
            assert!(!f.is_empty());
            let (lo, hi) = profile.vertical_fov;
            for p in &f.points {
                let (az, el) = spherical_coords(&p.position).unwrap();
                assert!(az.to_degrees().abs() <= profile.nominal_azimuth_span / 2.0 + 1e-9);
                assert!(el.to_degrees() >= lo - 1e-9 && el.to_degrees() <= hi + 1e-9);
            }
        }
    }
}
