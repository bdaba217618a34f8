//! Severity sweeps: degrade a rendered sequence per tier and repeat, run
//! odometry, and summarize APE against ground truth.

use std::fmt::Write as _;

use nalgebra::{Isometry3, UnitQuaternion, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ape::{ape_statistics, compute_ape, ApeResult, DEFAULT_MAX_DT};
use super::odometry::run_odometry;
use super::render::render_scan;
use super::scene::{generate_scene, Scene};
use super::trajectory::{Pose, Trajectory};
use crate::engine::apply_chain;
use crate::io::detect::{ProfileClass, SensorProfile};
use crate::io::schema::FieldSchema;
use crate::model::{validate_params, ParamError, PointCloudFrame, ScenarioConfig, Tier};
use crate::seed::sweep_cell_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum PathShape {
    Line { length: f64 },
    /// Left turn of `angle_deg` on a circle of `radius`.
    Arc { radius: f64, angle_deg: f64 },
}

/// Sensor path through the scene, sampled once per scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub shape: PathShape,
    pub frames: usize,
    /// Scan rate in Hz; scan `k` starts at `k / rate`.
    pub rate: f64,
    pub start: [f64; 3],
    pub heading_deg: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self { shape: PathShape::Line { length: 3.0 }, frames: 16, rate: 10.0, start: [-1.5, 0.0, 1.2], heading_deg: 0.0 }
    }
}

impl TrajectorySpec {
    /// Pose of scan `k` in scene coordinates.
    pub fn world_pose(&self, k: usize) -> Pose {
        let s = if self.frames > 1 { k as f64 / (self.frames - 1) as f64 } else { 0.0 };
        let (local, yaw) = match self.shape {
            PathShape::Line { length } => (Vector3::new(length * s, 0.0, 0.0), 0.0),
            PathShape::Arc { radius, angle_deg } => {
                let a = angle_deg.to_radians() * s;
                (Vector3::new(radius * a.sin(), radius * (1.0 - a.cos()), 0.0), a)
            }
        };
        let heading = UnitQuaternion::from_euler_angles(0.0, 0.0, self.heading_deg.to_radians());
        Pose {
            timestamp: k as f64 / self.rate,
            rotation: heading * UnitQuaternion::from_euler_angles(0.0, 0.0, yaw),
            translation: Vector3::from(self.start) + heading * local,
        }
    }

    pub fn path_length(&self) -> f64 {
        match self.shape {
            PathShape::Line { length } => length.abs(),
            PathShape::Arc { radius, angle_deg } => (radius * angle_deg.to_radians()).abs(),
        }
    }

    /// Ground truth relative to the first scan, the frame odometry reports
    /// in.
    pub fn ground_truth(&self) -> Trajectory {
        let origin: Isometry3<f64> = self.world_pose(0).isometry().inverse();
        let poses = (0..self.frames).map(|k| {
            let p = self.world_pose(k);
            Pose::from_isometry(p.timestamp, &(origin * p.isometry()))
        });
        Trajectory::new(poses.collect()).expect("rate and frame count give increasing timestamps")
    }

    /// Clean scans along the path.
    pub fn render(&self, scene: &Scene, profile: &SensorProfile) -> Vec<PointCloudFrame> {
        (0..self.frames)
            .map(|k| {
                let mut f = render_scan(scene, &self.world_pose(k), profile, self.rate);
                f.frame_index = k as u64;
                f
            })
            .collect()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SweepError {
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error("trajectory needs at least 2 frames and a positive rate")]
    BadTrajectory,
    #[error("tier {tier}: {source}")]
    Params { tier: Tier, source: ParamError },
}

/// Per-tier statistics over repeats. Each repeat contributes its mean APE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub tier: Tier,
    pub repeats: usize,
    pub failures: usize,
    /// `None` when every repeat failed.
    pub stats: Option<ApeResult>,
    /// Mean APE of each repeat, `None` for failed ones.
    pub per_repeat: Vec<Option<f64>>,
    /// Diagnostics of failed repeats.
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub scene_seed: u64,
    pub global_seed: u64,
    pub trajectory: TrajectorySpec,
    pub profile: ProfileClass,
    /// APE of odometry on the undegraded scans.
    pub clean: Option<ApeResult>,
    pub cells: Vec<SweepCell>,
    /// Medians never decrease along the tier list; `None` if a cell has no
    /// statistics.
    pub monotone_median: Option<bool>,
}

impl SweepTable {
    pub fn median(&self, tier: Tier) -> Option<f64> {
        self.cells.iter().find(|c| c.tier == tier).and_then(|c| c.stats).map(|s| s.median)
    }

    pub fn all_failed(&self) -> bool {
        self.cells.iter().all(|c| c.stats.is_none())
    }
}

/// APE of one odometry run; a truncated run counts as a failure.
fn evaluate(truth: &Trajectory, scans: &[PointCloudFrame]) -> Result<ApeResult, String> {
    let run = run_odometry(scans).map_err(|e| e.to_string())?;
    if let Some(f) = run.failure {
        return Err(format!("registration failed at frame {}: {}", f.frame, f.error));
    }
    compute_ape(truth, &run.trajectory, false, DEFAULT_MAX_DT).map_err(|e| e.to_string())
}

/// Default sweep sensor: a generic spinning lidar.
pub fn default_profile() -> SensorProfile {
    SensorProfile::for_class(ProfileClass::Generic, FieldSchema::xyz_time())
}

pub fn severity_sweep(
    scene_seed: u64,
    trajectory: &TrajectorySpec,
    cfg: &ScenarioConfig,
    tiers: &[Tier],
    repeats: usize,
) -> Result<SweepTable, SweepError> {
    severity_sweep_with_profile(scene_seed, trajectory, cfg, tiers, repeats, &default_profile())
}

/// Runs every (tier, repeat) cell in parallel. Repeat `r` of `tier`
/// degrades with global seed `sweep_cell_seed(cfg.global_seed, tier, r)`,
/// so results do not depend on scheduling.
pub fn severity_sweep_with_profile(
    scene_seed: u64,
    trajectory: &TrajectorySpec,
    cfg: &ScenarioConfig,
    tiers: &[Tier],
    repeats: usize,
    profile: &SensorProfile,
) -> Result<SweepTable, SweepError> {
    if repeats == 0 {
        return Err(SweepError::NoRepeats);
    }
    if trajectory.frames < 2 || !(trajectory.rate > 0.0) {
        return Err(SweepError::BadTrajectory);
    }
    for &tier in tiers {
        validate_params(cfg.params(tier).clone()).map_err(|source| SweepError::Params { tier, source })?;
    }
    let scene = generate_scene(scene_seed);
    let scans = trajectory.render(&scene, profile);
    let truth = trajectory.ground_truth();
    let clean = evaluate(&truth, &scans).ok();

    let jobs: Vec<(Tier, usize)> = tiers.iter().flat_map(|&t| (0..repeats).map(move |r| (t, r))).collect();
    let outcomes: Vec<Result<f64, String>> = jobs
        .par_iter()
        .map(|&(tier, r)| {
            let mut cell_cfg = cfg.clone();
            cell_cfg.global_seed = sweep_cell_seed(cfg.global_seed, tier, r as u64);
            let degraded = scans
                .iter()
                .map(|s| apply_chain(s, &cell_cfg, tier, None).map(|(f, _)| f))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            evaluate(&truth, &degraded).map(|a| a.mean)
        })
        .collect();

    let cells: Vec<SweepCell> = tiers
        .iter()
        .enumerate()
        .map(|(i, &tier)| {
            let chunk = &outcomes[i * repeats..(i + 1) * repeats];
            let per_repeat: Vec<Option<f64>> = chunk.iter().map(|o| o.as_ref().ok().copied()).collect();
            let ok: Vec<f64> = per_repeat.iter().flatten().copied().collect();
            SweepCell {
                tier,
                repeats,
                failures: repeats - ok.len(),
                stats: ape_statistics(&ok).ok(),
                per_repeat,
                errors: chunk.iter().filter_map(|o| o.as_ref().err().cloned()).collect(),
            }
        })
        .collect();

    let medians: Option<Vec<f64>> = cells.iter().map(|c| c.stats.map(|s| s.median)).collect();
    let monotone_median = medians.map(|m| m.windows(2).all(|w| w[1] >= w[0]));
    Ok(SweepTable {
        scene_seed,
        global_seed: cfg.global_seed,
        trajectory: *trajectory,
        profile: profile.profile_class,
        clean,
        cells,
        monotone_median,
    })
}

/// Fixed-width text rendering of a sweep table.
pub fn render_table(table: &SweepTable) -> String {
    let mut out = String::new();
    writeln!(out, "{:<10} {:>10} {:>10} {:>10} {:>10} {:>8} {:>9}", "tier", "mean", "std", "rmse", "median", "repeats", "failures")
        .unwrap();
    let num = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.5}"));
    if let Some(c) = &table.clean {
        writeln!(out, "{:<10} {:>10} {:>10} {:>10} {:>10} {:>8} {:>9}", "clean", num(Some(c.mean)), num(Some(c.std)), num(Some(c.rmse)), num(Some(c.median)), 1, 0)
            .unwrap();
    }
    for c in &table.cells {
        let s = c.stats;
        writeln!(
            out,
            "{:<10} {:>10} {:>10} {:>10} {:>10} {:>8} {:>9}",
            c.tier.as_str(),
            num(s.map(|s| s.mean)),
            num(s.map(|s| s.std)),
            num(s.map(|s| s.rmse)),
            num(s.map(|s| s.median)),
            c.repeats,
            c.failures
        )
        .unwrap();
    }
    let flag = match table.monotone_median {
        Some(true) => "yes",
        Some(false) => "no",
        None => "n/a",
    };
    writeln!(out, "monotone median: {flag}").unwrap();
    out
}
