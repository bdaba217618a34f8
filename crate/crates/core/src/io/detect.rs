//! Sensor-class inference from point field layouts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::schema::{FieldSchema, SchemaError};
use crate::engine::geometry::azimuth;
use crate::model::PointCloudFrame;

/// Livox samples wider than this azimuth span are classed as Mid-360.
pub const MID360_SPAN_THRESHOLD_DEG: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileClass {
    #[serde(rename = "ouster-like")]
    OusterLike,
    #[serde(rename = "livox-avia-like")]
    LivoxAviaLike,
    #[serde(rename = "livox-mid360-like")]
    LivoxMid360Like,
    #[serde(rename = "generic")]
    Generic,
}

impl ProfileClass {
    pub const ALL: [ProfileClass; 4] =
        [ProfileClass::OusterLike, ProfileClass::LivoxAviaLike, ProfileClass::LivoxMid360Like, ProfileClass::Generic];

    pub fn as_str(self) -> &'static str {
        match self {
            ProfileClass::OusterLike => "ouster-like",
            ProfileClass::LivoxAviaLike => "livox-avia-like",
            ProfileClass::LivoxMid360Like => "livox-mid360-like",
            ProfileClass::Generic => "generic",
        }
    }
}

impl fmt::Display for ProfileClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown sensor profile `{0}` (expected ouster-like, livox-avia-like, livox-mid360-like or generic)")]
pub struct UnknownProfile(pub String);

impl FromStr for ProfileClass {
    type Err = UnknownProfile;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProfileClass::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| UnknownProfile(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorProfile {
    pub profile_class: ProfileClass,
    pub field_schema: FieldSchema,
    /// Degrees.
    pub nominal_azimuth_span: f64,
    /// Hz.
    pub nominal_rate: f64,
    /// Lower and upper elevation limits in degrees.
    pub vertical_fov: (f64, f64),
}

impl SensorProfile {
    /// Nominal geometry of `class` paired with `schema`.
    pub fn for_class(class: ProfileClass, schema: FieldSchema) -> Self {
        let (span, vertical_fov) = match class {
            ProfileClass::OusterLike => (360.0, (-45.0, 45.0)),
            ProfileClass::LivoxAviaLike => (70.4, (-38.6, 38.6)),
            ProfileClass::LivoxMid360Like => (360.0, (-7.0, 52.0)),
            ProfileClass::Generic => (360.0, (-15.0, 15.0)),
        };
        Self { profile_class: class, field_schema: schema, nominal_azimuth_span: span, nominal_rate: 10.0, vertical_fov }
    }
}

fn is_livox_layout(schema: &FieldSchema) -> bool {
    (schema.has("intensity") || schema.has("reflectivity"))
        && schema.has("tag")
        && schema.has("line")
        && schema.time_field().is_some()
}

fn is_ouster_layout(schema: &FieldSchema) -> bool {
    schema.has("intensity") && schema.has("reflectivity") && (schema.has("line") || schema.has("ring"))
}

/// Angular extent covered by the sample in degrees: 360 minus the widest
/// empty gap between consecutive azimuths. `None` when no point has a
/// defined azimuth.
pub fn observed_azimuth_span(frame: &PointCloudFrame) -> Option<f64> {
    let mut az: Vec<f64> = frame
        .points
        .iter()
        .filter(|p| p.position.x != 0.0 || p.position.y != 0.0)
        .map(|p| azimuth(&p.position).to_degrees())
        .collect();
    if az.is_empty() {
        return None;
    }
    az.sort_by(f64::total_cmp);
    let wrap_gap = az[0] + 360.0 - az[az.len() - 1];
    let widest = az.windows(2).map(|w| w[1] - w[0]).fold(wrap_gap, f64::max);
    Some(360.0 - widest)
}

/// Classifies a stream from its field layout, using the sample geometry to
/// tell Livox models apart. Without a sample a Livox layout defaults to
/// Avia.
pub fn detect_sensor_profile(
    schema: &FieldSchema,
    sample: Option<&PointCloudFrame>,
) -> Result<SensorProfile, SchemaError> {
    for axis in ["x", "y", "z"] {
        if !schema.has(axis) {
            return Err(SchemaError::MissingField(axis));
        }
    }
    let class = if is_livox_layout(schema) {
        match sample.and_then(observed_azimuth_span) {
            Some(span) if span > MID360_SPAN_THRESHOLD_DEG => ProfileClass::LivoxMid360Like,
            _ => ProfileClass::LivoxAviaLike,
        }
    } else if is_ouster_layout(schema) {
        ProfileClass::OusterLike
    } else {
        ProfileClass::Generic
    };
    Ok(SensorProfile::for_class(class, schema.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::schema::ScalarType;
    use crate::model::Point;

    fn arc(span_deg: f64, n: usize) -> PointCloudFrame {
        let pts = (0..n)
            .map(|i| {
                let a = (-span_deg / 2.0 + span_deg * i as f64 / (n - 1) as f64).to_radians();
                Point::new(5.0 * a.cos(), 5.0 * a.sin(), 0.2, 0.0)
            })
            .collect();
        PointCloudFrame::new(0, "s", 0.0, pts)
    }

    #[test]
    fn ouster_fields() {
        let p = detect_sensor_profile(&FieldSchema::ouster(), None).unwrap();
        assert_eq!(p.profile_class, ProfileClass::OusterLike);
        let minimal = FieldSchema::packed([
            ("x", ScalarType::F32, 1),
            ("y", ScalarType::F32, 1),
            ("z", ScalarType::F32, 1),
            ("intensity", ScalarType::F32, 1),
            ("reflectivity", ScalarType::U16, 1),
            ("line", ScalarType::U8, 1),
        ])
        .unwrap();
        assert_eq!(detect_sensor_profile(&minimal, None).unwrap().profile_class, ProfileClass::OusterLike);
    }

    #[test]
    fn xyz_is_generic() {
        assert_eq!(detect_sensor_profile(&FieldSchema::xyz(), None).unwrap().profile_class, ProfileClass::Generic);
        assert_eq!(detect_sensor_profile(&FieldSchema::xyz_time(), None).unwrap().profile_class, ProfileClass::Generic);
    }

    #[test]
    fn livox_split_by_span() {
        let s = FieldSchema::livox();
        let wide = detect_sensor_profile(&s, Some(&arc(355.0, 2000))).unwrap();
        assert_eq!(wide.profile_class, ProfileClass::LivoxMid360Like);
        let narrow = detect_sensor_profile(&s, Some(&arc(65.0, 2000))).unwrap();
        assert_eq!(narrow.profile_class, ProfileClass::LivoxAviaLike);
        assert_eq!(detect_sensor_profile(&s, None).unwrap().profile_class, ProfileClass::LivoxAviaLike);
    }

    #[test]
    fn span_estimate_matches_construction() {
        for span in [10.0, 65.0, 180.0, 299.0, 355.0] {
            let got = observed_azimuth_span(&arc(span, 5001)).unwrap();
            assert!((got - span).abs() < 1e-6, "{span} vs {got}");
        }
        assert_eq!(observed_azimuth_span(&PointCloudFrame::new(0, "s", 0.0, vec![])), None);
    }

    #[test]
    fn detection_is_repeatable() {
        let f = arc(200.0, 300);
        let a = detect_sensor_profile(&FieldSchema::livox(), Some(&f)).unwrap();
        let b = detect_sensor_profile(&FieldSchema::livox(), Some(&f)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn class_names_parse() {
        for c in ProfileClass::ALL {
            assert_eq!(c.as_str().parse::<ProfileClass>().unwrap(), c);
        }
        assert!("velodyne".parse::<ProfileClass>().is_err());
    }
}
