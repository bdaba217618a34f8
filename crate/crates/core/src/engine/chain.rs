use std::time::Instant;

use rand::Rng;
use thiserror::Error;

use super::imu::{estimate_velocity, ImuSample, MotionEstimate};
use super::ops;
use crate::model::{
    reduction_ratio, validate_params, DegradationParams, FrameStats, ModuleId, ModuleStats, ParamError,
    PointCloudFrame, ScenarioConfig, Tier, UnknownModule, UnknownTier,
};
use crate::seed::{derive_seed, rng_from_seed};

/// Ordinal reserved for the random-subset selection stream.
const SUBSET_ORDINAL: u64 = 7;

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error(transparent)]
    UnknownTier(#[from] UnknownTier),
    #[error(transparent)]
    UnknownModule(#[from] UnknownModule),
    #[error("invalid parameters: {0}")]
    Params(#[from] ParamError),
}

/// Motion used by the distortion module: IMU-derived when requested and the
/// buffer covers the scan, configured constants otherwise.
pub fn resolve_motion(frame: &PointCloudFrame, params: &DegradationParams, imu: Option<&[ImuSample]>) -> MotionEstimate {
    let configured = MotionEstimate {
        linear_velocity: params.motion.linear_velocity,
        angular_velocity: params.motion.angular_velocity,
    };
    if !params.motion.use_imu {
        return configured;
    }
    let Some(buf) = imu else { return configured };
    let t1 = frame.t0 + frame.span();
    estimate_velocity(buf, frame.t0, t1, nalgebra::Vector3::zeros()).unwrap_or(configured)
}

/// Applies one module with an explicit seed.
pub fn run_module(
    frame: PointCloudFrame,
    module: ModuleId,
    params: &DegradationParams,
    seed: u64,
    motion: &MotionEstimate,
) -> PointCloudFrame {
    match module {
        ModuleId::Fov => {
            let (az, el) = params.fov.radians();
            ops::apply_fov_reduction(frame, az, el)
        }
        ModuleId::Occlusion => ops::apply_occlusion(frame, &params.occlusion, seed),
        ModuleId::StructuredDropout => match &params.structured_sector {
            Some(sector) => {
                let (start, extent) = ops::sector_radians(sector, seed);
                ops::apply_structured_dropout(frame, start, extent)
            }
            None => frame,
        },
        ModuleId::Dropout => ops::apply_dropout(frame, params.dropout_ratio, seed),
        ModuleId::Sparsify => ops::apply_sparsification(frame, params.sparsify_stride),
        ModuleId::Noise => ops::apply_noise(frame, &params.noise, seed),
        ModuleId::Motion => ops::apply_motion_distortion(frame, motion),
    }
}

/// Modules that will run on this frame, honoring random-subset mode.
pub fn active_modules(cfg: &ScenarioConfig, frame_index: u64) -> Vec<ModuleId> {
    if !cfg.random_subset {
        return cfg.module_chain.clone();
    }
    let mut rng = rng_from_seed(derive_seed(cfg.global_seed, frame_index, SUBSET_ORDINAL));
    cfg.module_chain.iter().copied().filter(|_| rng.random::<bool>()).collect()
}

/// Runs the configured chain for `tier` on a copy of `frame`.
///
/// Each module is seeded with `derive_seed(global_seed, frame_index,
/// module_ordinal)`, so the output depends only on the inputs.
pub fn apply_chain(
    frame: &PointCloudFrame,
    cfg: &ScenarioConfig,
    tier: Tier,
    imu: Option<&[ImuSample]>,
) -> Result<(PointCloudFrame, FrameStats), ChainError> {
    let params = validate_params(cfg.params(tier).clone())?;
    let motion = resolve_motion(frame, &params, imu);
    let mut out = frame.clone();
    let mut stats = FrameStats::new(frame.frame_index, &frame.sensor_id, frame.len(), 0);
    for module in active_modules(cfg, frame.frame_index) {
        let seed = derive_seed(cfg.global_seed, frame.frame_index, module.ordinal());
        let input_count = out.len();
        let started = Instant::now();
        out = run_module(out, module, &params, seed, &motion);
        stats.modules.push(ModuleStats {
            module,
            input_count,
            output_count: out.len(),
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    stats.output_count = out.len();
    stats.reduction_ratio = reduction_ratio(stats.input_count, stats.output_count);
    Ok((out, stats))
}

/// [`apply_chain`] with the tier given by name.
pub fn apply_chain_named(
    frame: &PointCloudFrame,
    cfg: &ScenarioConfig,
    tier: &str,
    imu: Option<&[ImuSample]>,
) -> Result<(PointCloudFrame, FrameStats), ChainError> {
    apply_chain(frame, cfg, tier.parse()?, imu)
}
