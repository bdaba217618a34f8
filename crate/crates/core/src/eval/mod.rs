//! Robustness evaluation: synthetic scenes and scans, ICP odometry,
//! trajectory alignment, APE and severity sweeps.

pub mod align;
pub mod ape;
pub mod icp;
pub mod odometry;
pub mod render;
pub mod scene;
pub mod sweep;
pub mod trajectory;

pub use align::{umeyama_align, AlignError, Similarity};
pub use ape::{ape_statistics, compute_ape, ApeError, ApeResult, DEFAULT_MAX_DT};
pub use icp::{icp_register, icp_register_with, Correspondence, IcpConfig, IcpError, IcpResult};
pub use odometry::{run_odometry, run_odometry_with, OdometryError, OdometryFailure, OdometryRun};
pub use render::render_scan;
pub use scene::{generate_scene, Aabb, Scene, SurfacePoint};
pub use sweep::{render_table, severity_sweep, severity_sweep_with_profile, PathShape, SweepCell, SweepError, SweepTable, TrajectorySpec};
pub use trajectory::{associate, AssociationError, Pose, Trajectory, TrajectoryError};
