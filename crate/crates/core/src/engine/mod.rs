//! Degradation operators, IMU motion estimation and deterministic chaining.

pub mod chain;
pub mod gaussian;
pub mod geometry;
pub mod imu;
pub mod ops;

pub use chain::{apply_chain, apply_chain_named, run_module, ChainError};
pub use geometry::{rodrigues, rotation_from_axis_angle, spherical_coords};
pub use imu::{estimate_velocity, ImuError, ImuSample, MotionEstimate};
pub use ops::{
    apply_dropout, apply_fov_reduction, apply_motion_distortion, apply_noise, apply_occlusion, apply_sparsification,
    apply_structured_dropout,
};
