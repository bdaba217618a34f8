//! Latency benchmark of the degradation chain on a synthetic frame.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::engine::{apply_chain, ChainError};
use crate::io::schema::FieldSchema;
use crate::model::{Point, PointCloudFrame, ScenarioConfig, Tier};
use crate::seed::rng_from_seed;

/// Per-frame latency target in milliseconds.
pub const TARGET_MS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub mean_ms: f64,
    pub p95_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuleTiming {
    pub module: String,
    /// Timed iterations in which the module ran.
    pub runs: usize,
    #[serde(flatten)]
    pub timing: Timing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchStatus {
    Pass,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub points: usize,
    pub tier: Tier,
    pub iterations: usize,
    pub warmup: usize,
    /// Mean output size over timed iterations.
    pub mean_output_points: f64,
    pub modules: Vec<ModuleTiming>,
    /// Per iteration, the sum of module timings.
    pub total: Timing,
    pub target_ms: f64,
    /// `pass` when the total mean is under the target.
    pub status: BenchStatus,
}

/// A full-circle scan of `n` points at 1 to 60 m, ordered by azimuth with
/// time offsets spanning one 0.1 s period.
pub fn synthetic_frame(n: usize, seed: u64) -> PointCloudFrame {
    let mut rng = rng_from_seed(seed);
    let points = (0..n)
        .map(|i| {
            let frac = (i as f64 + rng.random::<f64>()) / n as f64;
            let az = -PI + 2.0 * PI * frac;
            let el = rng.random_range(-15f64..15.0).to_radians();
            let r = rng.random_range(1.0..60.0);
            Point::new(r * el.cos() * az.cos(), r * el.cos() * az.sin(), r * el.sin(), 0.1 * i as f64 / n as f64)
        })
        .collect();
    let mut frame = PointCloudFrame::new(0, "bench", 0.0, points);
    frame.schema = FieldSchema::xyz_time();
    frame
}

fn summarize(ms: &mut [f64]) -> Timing {
    if ms.is_empty() {
        return Timing { mean_ms: 0.0, p95_ms: 0.0 };
    }
    ms.sort_by(f64::total_cmp);
    let rank = ((0.95 * ms.len() as f64).ceil() as usize).clamp(1, ms.len());
    Timing { mean_ms: ms.iter().sum::<f64>() / ms.len() as f64, p95_ms: ms[rank - 1] }
}

/// Times `apply_chain` over `iterations` runs after `warmup` untimed ones.
/// Iteration `i` uses frame index `i`, so random draws differ between
/// runs the way they would across a sequence.
pub fn run_bench(
    cfg: &ScenarioConfig,
    tier: Tier,
    points: usize,
    iterations: usize,
    warmup: usize,
) -> Result<BenchReport, ChainError> {
    let iterations = iterations.max(1);
    let mut frame = synthetic_frame(points, cfg.global_seed);
    let mut per_module: Vec<(String, Vec<f64>)> = Vec::new();
    let mut totals = Vec::with_capacity(iterations);
    let mut out_points = 0usize;
    for i in 0..warmup + iterations {
        frame.frame_index = i as u64;
        let (out, stats) = apply_chain(&frame, cfg, tier, None)?;
        if i < warmup {
            continue;
        }
        out_points += out.len();
        totals.push(stats.total_seconds() * 1e3);
        for m in &stats.modules {
            let name = m.module.as_str();
            match per_module.iter_mut().find(|(n, _)| n == name) {
                Some((_, v)) => v.push(m.seconds * 1e3),
                None => per_module.push((name.to_string(), vec![m.seconds * 1e3])),
            }
        }
    }
    let modules = per_module
        .into_iter()
        .map(|(module, mut v)| ModuleTiming { module, runs: v.len(), timing: summarize(&mut v) })
        .collect();
    let total = summarize(&mut totals);
    Ok(BenchReport {
        points,
        tier,
        iterations,
        warmup,
        mean_output_points: out_points as f64 / iterations as f64,
        modules,
        total,
        target_ms: TARGET_MS,
        status: if total.mean_ms < TARGET_MS { BenchStatus::Pass } else { BenchStatus::Warn },
    })
}
