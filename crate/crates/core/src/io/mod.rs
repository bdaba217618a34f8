//! Point-cloud containers, scenario configs, sensor detection and stats.

pub mod config;
pub mod detect;
pub mod pcd;
pub mod schema;
pub mod stats;
pub mod stream;

pub use config::{apply_override, config_document, parse_scenario_config, parse_scenario_config_with_overrides, ConfigError};
pub use detect::{detect_sensor_profile, observed_azimuth_span, ProfileClass, SensorProfile};
pub use pcd::{decode_pcd, encode_pcd, read_pcd, read_pcd_report, write_pcd, PcdEncoding, PcdError, PcdRead};
pub use schema::{Field, FieldSchema, ScalarType, SchemaError};
pub use stats::{emit_stats, StatsRecord};
pub use stream::{encode_frame, read_frame_stream, FrameStreamReader, FrameStreamWriter, StreamError};
