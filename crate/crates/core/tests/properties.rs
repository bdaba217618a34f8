use nalgebra::{Isometry3, Matrix3, Point3, Translation3, UnitQuaternion, Vector3};
use proptest::prelude::*;
use rayon::prelude::*;

use lidegrade::engine::imu::MotionEstimate;
use lidegrade::engine::{
    apply_chain, apply_dropout, apply_fov_reduction, apply_motion_distortion, apply_noise, apply_occlusion,
    apply_sparsification, apply_structured_dropout, rodrigues, rotation_from_axis_angle,
};
use lidegrade::eval::ape::compute_ape;
use lidegrade::eval::icp::{icp_register_with, Correspondence, IcpConfig};
use lidegrade::eval::trajectory::{Pose, Trajectory};
use lidegrade::io::config::parse_scenario_config_with_overrides;
use lidegrade::io::detect::detect_sensor_profile;
use lidegrade::io::pcd::{decode_pcd, encode_pcd, PcdEncoding};
use lidegrade::io::schema::FieldSchema;
use lidegrade::io::stream::{read_frame_stream, FrameStreamWriter, StreamSchema};
use lidegrade::model::{reduction_ratio, NoiseParams, OcclusionParams};
use lidegrade::{derive_seed, ModuleId, Point, PointCloudFrame, ScenarioConfig, Tier};

fn arb_point() -> impl Strategy<Value = (f64, f64, f64, Option<f64>, Option<u16>)> {
    (-60.0..60.0f64, -60.0..60.0f64, -10.0..10.0f64, proptest::option::of(0.0..255.0f64), proptest::option::of(0u16..128))
}

/// Frames with time offsets non-decreasing over [0, 0.1].
fn arb_frame(max: usize) -> impl Strategy<Value = PointCloudFrame> {
    (proptest::collection::vec(arb_point(), 0..max), 0u64..1000, 0.0..1e9f64).prop_map(|(raw, index, t0)| {
        let n = raw.len().max(1) as f64;
        let points = raw
            .into_iter()
            .enumerate()
            .map(|(i, (x, y, z, intensity, ring))| {
                let mut p = Point::new(x, y, z, 0.1 * i as f64 / n);
                p.attributes.intensity = intensity;
                p.attributes.ring = ring;
                p
            })
            .collect();
        PointCloudFrame::new(index, "prop", t0, points)
    })
}

fn arb_tier() -> impl Strategy<Value = Tier> {
    prop::sample::select(Tier::ALL.to_vec())
}

/// Positions of `out` appear in `input` in the same relative order, each
/// matched point carrying identical attributes and time.
fn is_subsequence(out: &PointCloudFrame, input: &PointCloudFrame) -> bool {
    let mut it = input.points.iter();
    out.points.iter().all(|p| it.any(|q| q == p))
}

fn same_times_and_attributes(a: &PointCloudFrame, b: &PointCloudFrame) -> bool {
    a.len() == b.len()
        && a.points.iter().zip(&b.points).all(|(p, q)| p.time_offset == q.time_offset && p.attributes == q.attributes)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_output_is_ordered_subset_of_times(frame in arb_frame(400), tier in arb_tier(), seed in any::<u64>()) {
        let cfg = ScenarioConfig::with_defaults(seed);
        let (out, stats) = apply_chain(&frame, &cfg, tier, None).unwrap();
        prop_assert!(out.len() <= frame.len());
        prop_assert_eq!(stats.input_count, frame.len());
        prop_assert_eq!(stats.output_count, out.len());
        prop_assert_eq!(stats.reduction_ratio, reduction_ratio(frame.len(), out.len()));
        if !frame.is_empty() {
            prop_assert_eq!(stats.reduction_ratio, 1.0 - out.len() as f64 / frame.len() as f64);
        }
        // Survivors keep their time offsets and attributes, in order.
        let mut it = frame.points.iter();
        for p in &out.points {
            prop_assert!(it.any(|q| q.time_offset == p.time_offset && q.attributes == p.attributes));
        }
        prop_assert!(out.points.windows(2).all(|w| w[0].time_offset <= w[1].time_offset));
    }

    #[test]
    fn selection_chain_is_exact_subsequence(frame in arb_frame(400), tier in arb_tier(), seed in any::<u64>()) {
        let mut cfg = ScenarioConfig::with_defaults(seed);
        cfg.module_chain = vec![ModuleId::Fov, ModuleId::Occlusion, ModuleId::StructuredDropout, ModuleId::Dropout, ModuleId::Sparsify];
        let (out, _) = apply_chain(&frame, &cfg, tier, None).unwrap();
        prop_assert!(is_subsequence(&out, &frame));
    }

    #[test]
    fn chain_is_schedule_independent(frames in proptest::collection::vec(arb_frame(200), 1..6), seed in any::<u64>(), tier in arb_tier()) {
        let cfg = ScenarioConfig::with_defaults(seed);
        let seq: Vec<PointCloudFrame> = frames.iter().map(|f| apply_chain(f, &cfg, tier, None).unwrap().0).collect();
        let par: Vec<PointCloudFrame> = frames.par_iter().rev().map(|f| apply_chain(f, &cfg, tier, None).unwrap().0).collect();
        for (a, b) in seq.iter().zip(par.iter().rev()) {
            prop_assert!(a.bitwise_eq(b));
        }
    }

    #[test]
    fn derive_seed_is_pure(g in any::<u64>(), f in any::<u64>(), m in 0u64..8) {
        let first = derive_seed(g, f, m);
        let others: Vec<u64> = (0..4).into_par_iter().map(|_| derive_seed(g, f, m)).collect();
        prop_assert!(others.iter().all(|&s| s == first));
    }

    #[test]
    fn selection_ops_keep_coordinates(frame in arb_frame(300), seed in any::<u64>(), ratio in 0.0..1.0f64,
                                      az in 0.0..std::f64::consts::PI, el in 0.0..std::f64::consts::FRAC_PI_2,
                                      start in -3.2..3.2f64, extent in 0.0..6.3f64, stride in 1usize..9) {
        let occ = OcclusionParams { patch_count: 4, patch_radius: 3.0, min_range: 1.0, max_range: 15.0 };
        for out in [
            apply_dropout(frame.clone(), ratio, seed),
            apply_fov_reduction(frame.clone(), az, el),
            apply_occlusion(frame.clone(), &occ, seed),
            apply_structured_dropout(frame.clone(), start, extent),
            apply_sparsification(frame.clone(), stride),
        ] {
            prop_assert!(is_subsequence(&out, &frame));
        }
        prop_assert_eq!(apply_sparsification(frame.clone(), stride).len(), frame.len().div_ceil(stride));
    }

    #[test]
    fn perturbations_keep_count_order_and_time(frame in arb_frame(300), seed in any::<u64>(), sigma in 0.0..0.1f64,
                                               q in 0.0..1.0f64, v in prop::array::uniform3(-3.0..3.0f64),
                                               w in prop::array::uniform3(-2.0..2.0f64)) {
        let noisy = apply_noise(frame.clone(), &NoiseParams { sigma, outlier_prob: q, outlier_sigma: 0.5 }, seed);
        prop_assert!(same_times_and_attributes(&noisy, &frame));
        let motion = MotionEstimate { linear_velocity: Vector3::from(v), angular_velocity: Vector3::from(w) };
        let moved = apply_motion_distortion(frame.clone(), &motion);
        prop_assert!(same_times_and_attributes(&moved, &frame));
        // Ranges change by at most |v| dt + the first-order branch's stretch.
        for (a, b) in frame.points.iter().zip(&moved.points) {
            let dt = a.time_offset;
            let stretch = 1.0 + (Vector3::from(w) * dt).norm();
            prop_assert!(b.position.norm() <= a.position.norm() * stretch + Vector3::from(v).norm() * dt + 1e-9);
        }
    }

    #[test]
    fn rotation_laws(axis in prop::array::uniform3(-1.0..1.0f64), angle in 0.0..std::f64::consts::PI, small in 0.0..0.1f64) {
        let a = Vector3::from(axis);
        prop_assume!(a.norm() > 1e-3);
        let aa = a.normalize() * angle;
        let r = rodrigues(&aa);
        prop_assert!((r.transpose() * r - Matrix3::identity()).abs().max() <= 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() <= 1e-12);
        let s = a.normalize() * small;
        let err = (rotation_from_axis_angle(&s) - rodrigues(&s)).abs().max();
        prop_assert!(err <= s.norm_squared() / 2.0 + 1e-15);
    }

    #[test]
    fn pcd_and_stream_roundtrip(frame in arb_frame(200), layout in 0usize..4) {
        let schema = [StreamSchema::Xyz, StreamSchema::XyzIntensity, StreamSchema::Ouster, StreamSchema::Livox][layout].schema();
        // Quantize to what the layout can carry.
        let mut f = frame;
        f.schema = schema;
        for p in &mut f.points {
            p.position = p.position.map(|c| c as f32 as f64);
            p.time_offset = p.time_offset as f32 as f64;
            p.attributes.intensity = if f.schema.has("intensity") { Some(p.attributes.intensity.unwrap_or(0.0) as f32 as f64) } else { None };
            p.attributes.reflectivity = if f.schema.has("reflectivity") { Some(p.attributes.reflectivity.unwrap_or(0.0).round()) } else { None };
            p.attributes.ring = if f.schema.has("line") { Some(p.attributes.ring.unwrap_or(0)) } else { None };
            p.attributes.extra = if f.schema.has("tag") { vec![0.0] } else { vec![] };
        }
        for enc in [PcdEncoding::Binary, PcdEncoding::Ascii] {
            let back = decode_pcd(&encode_pcd(&f, enc)).unwrap();
            prop_assert!(back.frame.bitwise_eq(&f), "{:?}", enc);
        }
        let mut w = FrameStreamWriter::new(Vec::new());
        w.write_frame(&f).unwrap();
        let bytes = w.into_inner();
        let back: Vec<_> = read_frame_stream(bytes.as_slice(), "prop").collect();
        prop_assert_eq!(back.len(), 1);
        prop_assert!(back[0].as_ref().unwrap().bitwise_eq(&f));
    }

    #[test]
    fn detection_is_pure(frame in arb_frame(200), which in 0usize..4) {
        let schema = [FieldSchema::xyz(), FieldSchema::xyz_time(), FieldSchema::ouster(), FieldSchema::livox()][which].clone();
        let a = detect_sensor_profile(&schema, Some(&frame)).unwrap();
        let b = detect_sensor_profile(&schema, Some(&frame)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn config_errors_never_panic(key in "[a-z_]{1,12}(\\.[a-z_]{1,12}){0,3}", value in "[a-z0-9\\[\\]., -]{0,12}") {
        let assignment = format!("{key}={value}");
        let _ = parse_scenario_config_with_overrides("", &[assignment]);
    }

    #[test]
    fn config_errors_name_their_path(tier in arb_tier(), ratio in 1.0001..100.0f64) {
        let o = format!("augmentations.dropout.{tier}.ratio={ratio}");
        let err = parse_scenario_config_with_overrides("", &[o]).unwrap_err();
        let expected = format!("augmentations.dropout.{tier}.ratio");
        prop_assert!(err.to_string().contains(&expected));
    }
}

fn arb_trajectory() -> impl Strategy<Value = Trajectory> {
    proptest::collection::vec((prop::array::uniform3(-30.0..30.0f64), -3.1..3.1f64, 0.01..0.5f64), 3..60).prop_map(|raw| {
        let mut t = 0.0;
        let poses = raw
            .into_iter()
            .map(|(p, yaw, dt)| {
                t += dt;
                Pose { timestamp: t, rotation: UnitQuaternion::from_euler_angles(0.0, 0.0, yaw), translation: Vector3::from(p) }
            })
            .collect();
        Trajectory::new(poses).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ape_self_is_zero(t in arb_trajectory()) {
        let r = compute_ape(&t, &t, false, 0.01).unwrap();
        prop_assert!([r.mean, r.std, r.rmse, r.median, r.min, r.max].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ape_laws(reference in arb_trajectory(), noise in proptest::collection::vec(prop::array::uniform3(-1.0..1.0f64), 60),
                yaw in -3.1..3.1f64, shift in prop::array::uniform3(-50.0..50.0f64)) {
        let est = Trajectory::new(
            reference.poses().iter().zip(&noise).map(|(p, n)| Pose { translation: p.translation + Vector3::from(*n), ..*p }).collect(),
        ).unwrap();
        let a = compute_ape(&reference, &est, false, 0.01).unwrap();
        prop_assert!(a.min <= a.median && a.median <= a.max);
        prop_assert!((a.rmse * a.rmse - (a.mean * a.mean + a.std * a.std)).abs() <= 1e-9);

        let g = Isometry3::from_parts(Translation3::from(Vector3::from(shift)), UnitQuaternion::from_euler_angles(0.1, -0.2, yaw));
        let b = compute_ape(&reference.transformed(&g), &est.transformed(&g), false, 0.01).unwrap();
        prop_assert!((a.mean - b.mean).abs() <= 1e-9 && (a.max - b.max).abs() <= 1e-9 && (a.std - b.std).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn icp_index_true_is_exact(pts in proptest::collection::vec(prop::array::uniform3(-20.0..20.0f64), 20..200),
                               rot in prop::array::uniform3(-1.5..1.5f64), shift in prop::array::uniform3(-10.0..10.0f64)) {
        let src = PointCloudFrame::new(0, "s", 0.0, pts.iter().map(|p| Point::new(p[0], p[1], p[2], 0.0)).collect());
        let truth = Isometry3::from_parts(Translation3::from(Vector3::from(shift)), UnitQuaternion::from_scaled_axis(Vector3::from(rot)));
        let mut tgt = src.clone();
        tgt.points.iter_mut().for_each(|p| p.position = (truth * Point3::from(p.position)).coords);
        let cfg = IcpConfig { correspondence: Correspondence::IndexTrue, max_correspondence_dist: f64::INFINITY, ..IcpConfig::default() };
        let got = icp_register_with(&src, &tgt, &Isometry3::identity(), &cfg).unwrap().transform;
        let d = got.inverse() * truth;
        prop_assert!(d.translation.vector.norm() <= 1e-9 && d.rotation.angle() <= 1e-9);
    }
}
