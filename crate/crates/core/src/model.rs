//! Shared domain types: points, frames, degradation parameters, scenario
//! configuration and per-frame statistics.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::schema::FieldSchema;

/// Per-point attributes carried through every degradation untouched.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttributeSet {
    pub intensity: Option<f64>,
    pub reflectivity: Option<f64>,
    /// Laser ring (spinning sensors) or line (Livox) index.
    pub ring: Option<u16>,
    /// Values of fields without a dedicated slot, in schema order.
    pub extra: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    /// Sensor-frame position in meters.
    pub position: Vector3<f64>,
    /// Seconds since the frame base time.
    pub time_offset: f64,
    pub attributes: AttributeSet,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, time_offset: f64) -> Self {
        Self {
            position: Vector3::new(x, y, z),
            time_offset,
            attributes: AttributeSet::default(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|c| c.is_finite()) && self.time_offset.is_finite()
    }
}

/// One lidar scan. Point order is acquisition order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudFrame {
    pub frame_index: u64,
    pub sensor_id: String,
    /// Absolute base time of the scan in seconds.
    pub t0: f64,
    /// Layout used when the frame is written back out.
    pub schema: FieldSchema,
    pub points: Vec<Point>,
}

impl PointCloudFrame {
    pub fn new(frame_index: u64, sensor_id: impl Into<String>, t0: f64, points: Vec<Point>) -> Self {
        Self {
            frame_index,
            sensor_id: sensor_id.into(),
            t0,
            schema: FieldSchema::xyz_time(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Drops points with a non-finite coordinate or time offset and returns
    /// how many were removed.
    pub fn retain_finite(&mut self) -> usize {
        let before = self.points.len();
        self.points.retain(Point::is_finite);
        before - self.points.len()
    }

    /// Latest time offset in the frame, 0 for an empty frame.
    pub fn span(&self) -> f64 {
        self.points.iter().map(|p| p.time_offset).fold(0.0, f64::max)
    }

    /// Exact equality including the sign of zero and NaN payloads.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        fn same(a: f64, b: f64) -> bool {
            a.to_bits() == b.to_bits()
        }
        fn same_opt(a: Option<f64>, b: Option<f64>) -> bool {
            match (a, b) {
                (Some(a), Some(b)) => same(a, b),
                (None, None) => true,
                _ => false,
            }
        }
        self.frame_index == other.frame_index
            && self.sensor_id == other.sensor_id
            && same(self.t0, other.t0)
            && self.schema == other.schema
            && self.points.len() == other.points.len()
            && self.points.iter().zip(&other.points).all(|(a, b)| {
                a.position.iter().zip(b.position.iter()).all(|(x, y)| same(*x, *y))
                    && same(a.time_offset, b.time_offset)
                    && same_opt(a.attributes.intensity, b.attributes.intensity)
                    && same_opt(a.attributes.reflectivity, b.attributes.reflectivity)
                    && a.attributes.ring == b.attributes.ring
                    && a.attributes.extra.len() == b.attributes.extra.len()
                    && a.attributes.extra.iter().zip(&b.attributes.extra).all(|(x, y)| same(*x, *y))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Light,
    Moderate,
    Heavy,
    Extreme,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::Light, Tier::Moderate, Tier::Heavy, Tier::Extreme];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Light => "light",
            Tier::Moderate => "moderate",
            Tier::Heavy => "heavy",
            Tier::Extreme => "extreme",
        }
    }

    pub fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown severity tier `{0}` (expected light, moderate, heavy or extreme)")]
pub struct UnknownTier(pub String);

impl FromStr for Tier {
    type Err = UnknownTier;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "light" => Ok(Tier::Light),
            "moderate" => Ok(Tier::Moderate),
            "heavy" => Ok(Tier::Heavy),
            "extreme" => Ok(Tier::Extreme),
            other => Err(UnknownTier(other.to_string())),
        }
    }
}

/// Degradation modules. The discriminant is the module ordinal used for
/// seed derivation and never changes with chain order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleId {
    Fov = 0,
    Occlusion = 1,
    StructuredDropout = 2,
    Dropout = 3,
    Sparsify = 4,
    Noise = 5,
    Motion = 6,
}

impl ModuleId {
    /// Default chain: selection on clean geometry, then perturbation of the
    /// survivors, motion distortion last.
    pub const DEFAULT_CHAIN: [ModuleId; 7] = [
        ModuleId::Fov,
        ModuleId::Occlusion,
        ModuleId::StructuredDropout,
        ModuleId::Dropout,
        ModuleId::Sparsify,
        ModuleId::Noise,
        ModuleId::Motion,
    ];

    pub fn ordinal(self) -> u64 {
        self as u64
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModuleId::Fov => "fov",
            ModuleId::Occlusion => "occlusion",
            ModuleId::StructuredDropout => "structured_dropout",
            ModuleId::Dropout => "dropout",
            ModuleId::Sparsify => "sparsify",
            ModuleId::Noise => "noise",
            ModuleId::Motion => "motion",
        }
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown module `{0}`")]
pub struct UnknownModule(pub String);

impl FromStr for ModuleId {
    type Err = UnknownModule;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModuleId::DEFAULT_CHAIN
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownModule(s.to_string()))
    }
}

/// Where a structured-dropout sector starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SectorStart {
    /// Fixed azimuth in degrees.
    Degrees(f64),
    /// Drawn uniformly from the module's seeded stream per frame.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorParams {
    pub start: SectorStart,
    pub extent_deg: f64,
}

/// Angular limits, in degrees as configured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FovLimits {
    pub max_azimuth_deg: f64,
    pub max_elevation_deg: f64,
}

impl FovLimits {
    pub const FULL: FovLimits = FovLimits { max_azimuth_deg: 180.0, max_elevation_deg: 90.0 };

    pub fn radians(&self) -> (f64, f64) {
        (self.max_azimuth_deg.to_radians(), self.max_elevation_deg.to_radians())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionParams {
    pub patch_count: usize,
    pub patch_radius: f64,
    pub min_range: f64,
    pub max_range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub sigma: f64,
    pub outlier_prob: f64,
    pub outlier_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionParams {
    pub linear_velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
    pub use_imu: bool,
}

/// Parameters of every module for one severity tier.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationParams {
    pub dropout_ratio: f64,
    pub structured_sector: Option<SectorParams>,
    pub fov: FovLimits,
    pub occlusion: OcclusionParams,
    pub noise: NoiseParams,
    pub sparsify_stride: usize,
    pub motion: MotionParams,
}

impl Default for DegradationParams {
    /// Identity parameters: every module is a no-op.
    fn default() -> Self {
        Self {
            dropout_ratio: 0.0,
            structured_sector: None,
            fov: FovLimits::FULL,
            occlusion: OcclusionParams { patch_count: 0, patch_radius: 0.0, min_range: 1.0, max_range: 15.0 },
            noise: NoiseParams { sigma: 0.0, outlier_prob: 0.0, outlier_sigma: 0.0 },
            sparsify_stride: 1,
            motion: MotionParams {
                linear_velocity: Vector3::zeros(),
                angular_velocity: Vector3::zeros(),
                use_imu: false,
            },
        }
    }
}

impl DegradationParams {
    /// Built-in tier table. Dropout, noise and FoV values sit inside the
    /// published ranges (15-40 %, 1-5 cm, 10-40 deg); occlusion, stride and
    /// motion are artifact defaults.
    pub fn tier_default(tier: Tier) -> Self {
        let i = tier.ordinal();
        let dropout = [0.15, 0.225, 0.325, 0.40][i];
        let sigma = [0.01, 0.02, 0.035, 0.05][i];
        let fov_shrink = [10.0, 20.0, 30.0, 40.0][i];
        let (patches, radius) = [(1, 0.3), (2, 0.5), (4, 0.8), (6, 1.2)][i];
        let outlier_prob = [0.001, 0.002, 0.005, 0.01][i];
        let outlier_sigma = [0.2, 0.3, 0.4, 0.5][i];
        let stride = [1, 2, 3, 4][i];
        let speed = [0.5, 1.0, 1.5, 2.0][i];
        let yaw_rate = [0.125, 0.25, 0.375, 0.5][i];
        Self {
            dropout_ratio: dropout,
            structured_sector: None,
            // Total azimuth FoV shrinks by `fov_shrink`, split symmetrically;
            // elevation shrinks by half as much.
            fov: FovLimits {
                max_azimuth_deg: 180.0 - fov_shrink / 2.0,
                max_elevation_deg: 90.0 - fov_shrink / 4.0,
            },
            occlusion: OcclusionParams { patch_count: patches, patch_radius: radius, min_range: 1.0, max_range: 15.0 },
            noise: NoiseParams { sigma, outlier_prob, outlier_sigma },
            sparsify_stride: stride,
            motion: MotionParams {
                linear_velocity: Vector3::new(speed, 0.0, 0.0),
                angular_velocity: Vector3::new(0.0, 0.0, yaw_rate),
                use_imu: false,
            },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{field} = {value} is out of range: {expected}")]
pub struct ParamError {
    pub field: &'static str,
    pub value: String,
    pub expected: &'static str,
}

fn check(ok: bool, field: &'static str, value: impl fmt::Display, expected: &'static str) -> Result<(), ParamError> {
    if ok {
        Ok(())
    } else {
        Err(ParamError { field, value: value.to_string(), expected })
    }
}

/// Returns the parameters unchanged if every range invariant holds.
pub fn validate_params(p: DegradationParams) -> Result<DegradationParams, ParamError> {
    check((0.0..=1.0).contains(&p.dropout_ratio), "dropout_ratio", p.dropout_ratio, "[0, 1]")?;
    if let Some(sector) = &p.structured_sector {
        check(
            sector.extent_deg > 0.0 && sector.extent_deg < 360.0,
            "structured_sector.extent_deg",
            sector.extent_deg,
            "(0, 360)",
        )?;
        if let SectorStart::Degrees(start) = sector.start {
            check(start.is_finite(), "structured_sector.start_deg", start, "finite")?;
        }
    }
    check(
        p.fov.max_azimuth_deg > 0.0 && p.fov.max_azimuth_deg <= 180.0,
        "fov.max_azimuth_deg",
        p.fov.max_azimuth_deg,
        "(0, 180]",
    )?;
    check(
        p.fov.max_elevation_deg > 0.0 && p.fov.max_elevation_deg <= 90.0,
        "fov.max_elevation_deg",
        p.fov.max_elevation_deg,
        "(0, 90]",
    )?;
    let occ = &p.occlusion;
    check(occ.patch_radius >= 0.0 && occ.patch_radius.is_finite(), "occlusion.patch_radius", occ.patch_radius, ">= 0")?;
    check(occ.min_range >= 0.0, "occlusion.min_range", occ.min_range, ">= 0")?;
    check(
        occ.max_range > occ.min_range && occ.max_range.is_finite(),
        "occlusion.max_range",
        occ.max_range,
        "> occlusion.min_range",
    )?;
    check(p.noise.sigma >= 0.0 && p.noise.sigma.is_finite(), "noise.sigma", p.noise.sigma, ">= 0")?;
    check((0.0..=1.0).contains(&p.noise.outlier_prob), "noise.outlier_prob", p.noise.outlier_prob, "[0, 1]")?;
    check(
        p.noise.outlier_sigma >= 0.0 && p.noise.outlier_sigma.is_finite(),
        "noise.outlier_sigma",
        p.noise.outlier_sigma,
        ">= 0",
    )?;
    check(p.sparsify_stride >= 1, "sparsify_stride", p.sparsify_stride, ">= 1")?;
    let finite = |v: &Vector3<f64>| v.iter().all(|c| c.is_finite());
    check(finite(&p.motion.linear_velocity), "motion.linear_velocity", format!("{:?}", p.motion.linear_velocity.as_slice()), "finite")?;
    check(finite(&p.motion.angular_velocity), "motion.angular_velocity", format!("{:?}", p.motion.angular_velocity.as_slice()), "finite")?;
    Ok(p)
}

/// Tier table, module chain and seed for a degradation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    tiers: [DegradationParams; 4],
    pub module_chain: Vec<ModuleId>,
    pub global_seed: u64,
    /// When set, each frame runs a seeded random subset of the chain.
    pub random_subset: bool,
}

#[derive(Debug, Error, PartialEq)]
#[error("module `{0}` appears more than once in the chain")]
pub struct DuplicateModule(pub ModuleId);

impl ScenarioConfig {
    pub fn new(
        tiers: [DegradationParams; 4],
        module_chain: Vec<ModuleId>,
        global_seed: u64,
    ) -> Result<Self, DuplicateModule> {
        for (i, m) in module_chain.iter().enumerate() {
            if module_chain[..i].contains(m) {
                return Err(DuplicateModule(*m));
            }
        }
        Ok(Self { tiers, module_chain, global_seed, random_subset: false })
    }

    pub fn with_defaults(global_seed: u64) -> Self {
        Self {
            tiers: Tier::ALL.map(DegradationParams::tier_default),
            module_chain: ModuleId::DEFAULT_CHAIN.to_vec(),
            global_seed,
            random_subset: false,
        }
    }

    pub fn params(&self, tier: Tier) -> &DegradationParams {
        &self.tiers[tier.ordinal()]
    }

    pub fn params_mut(&mut self, tier: Tier) -> &mut DegradationParams {
        &mut self.tiers[tier.ordinal()]
    }
}

/// Per-module timing and counts inside one chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleStats {
    pub module: ModuleId,
    pub input_count: usize,
    pub output_count: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStats {
    pub frame_index: u64,
    pub sensor_id: String,
    pub input_count: usize,
    pub output_count: usize,
    pub reduction_ratio: f64,
    /// Points removed at ingestion for non-finite values.
    pub nonfinite_dropped: usize,
    pub modules: Vec<ModuleStats>,
}

impl FrameStats {
    pub fn new(frame_index: u64, sensor_id: impl Into<String>, input_count: usize, output_count: usize) -> Self {
        Self {
            frame_index,
            sensor_id: sensor_id.into(),
            input_count,
            output_count,
            reduction_ratio: reduction_ratio(input_count, output_count),
            nonfinite_dropped: 0,
            modules: Vec::new(),
        }
    }

    pub fn total_seconds(&self) -> f64 {
        self.modules.iter().map(|m| m.seconds).sum()
    }
}

/// `1 - output/input`, and 0 for an empty input.
pub fn reduction_ratio(input_count: usize, output_count: usize) -> f64 {
    if input_count == 0 {
        0.0
    } else {
        1.0 - output_count as f64 / input_count as f64
    }
}
