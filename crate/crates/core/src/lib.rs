//! Deterministic, sensor-aware lidar point-cloud degradation.
//!
//! The crate applies dropout, field-of-view reduction, occlusion, noise,
//! sparsification and motion distortion at four severity tiers, and ships
//! a small evaluation harness (synthetic scenes, ICP odometry, absolute
//! pose error) for robustness sweeps.

pub mod cli;
pub mod engine;
pub mod eval;
pub mod io;
pub mod model;
pub mod seed;

pub use model::{
    validate_params, AttributeSet, DegradationParams, FrameStats, ModuleId, Point, PointCloudFrame, ScenarioConfig,
    Tier,
};
pub use seed::derive_seed;
