//! Point record layouts and the mapping from field names onto point slots.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarType {
    F32,
    F64,
    U8,
    U16,
    U32,
    I8,
    I16,
    I32,
}

impl ScalarType {
    pub fn size(self) -> usize {
        match self {
            ScalarType::U8 | ScalarType::I8 => 1,
            ScalarType::U16 | ScalarType::I16 => 2,
            ScalarType::F32 | ScalarType::U32 | ScalarType::I32 => 4,
            ScalarType::F64 => 8,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, ScalarType::F32 | ScalarType::F64)
    }

    /// PCD `TYPE` letter and `SIZE`.
    pub fn pcd_code(self) -> (char, usize) {
        let letter = match self {
            ScalarType::F32 | ScalarType::F64 => 'F',
            ScalarType::U8 | ScalarType::U16 | ScalarType::U32 => 'U',
            ScalarType::I8 | ScalarType::I16 | ScalarType::I32 => 'I',
        };
        (letter, self.size())
    }

    pub fn from_pcd(letter: &str, size: usize) -> Option<Self> {
        Some(match (letter, size) {
            ("F", 4) => ScalarType::F32,
            ("F", 8) => ScalarType::F64,
            ("U", 1) => ScalarType::U8,
            ("U", 2) => ScalarType::U16,
            ("U", 4) => ScalarType::U32,
            ("I", 1) => ScalarType::I8,
            ("I", 2) => ScalarType::I16,
            ("I", 4) => ScalarType::I32,
            _ => return None,
        })
    }

    /// Decodes one little-endian value; `bytes` must hold at least `size()`.
    pub fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            ScalarType::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            ScalarType::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
            ScalarType::U8 => bytes[0] as f64,
            ScalarType::U16 => u16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            ScalarType::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            ScalarType::I8 => bytes[0] as i8 as f64,
            ScalarType::I16 => i16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            ScalarType::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
        }
    }

    /// Encodes `value` little-endian, rounding and saturating for integers.
    pub fn write_le(self, value: f64, out: &mut Vec<u8>) {
        match self {
            ScalarType::F32 => out.extend_from_slice(&(value as f32).to_le_bytes()),
            ScalarType::F64 => out.extend_from_slice(&value.to_le_bytes()),
            ScalarType::U8 => out.push(value.round() as u8),
            ScalarType::U16 => out.extend_from_slice(&(value.round() as u16).to_le_bytes()),
            ScalarType::U32 => out.extend_from_slice(&(value.round() as u32).to_le_bytes()),
            ScalarType::I8 => out.push(value.round() as i8 as u8),
            ScalarType::I16 => out.extend_from_slice(&(value.round() as i16).to_le_bytes()),
            ScalarType::I32 => out.extend_from_slice(&(value.round() as i32).to_le_bytes()),
        }
    }

    /// Text form used by ASCII PCD: shortest exact representation for
    /// floats of this width, plain integers otherwise.
    pub fn format(self, value: f64) -> String {
        match self {
            ScalarType::F32 => format!("{}", value as f32),
            ScalarType::F64 => format!("{value}"),
            ScalarType::U8 => format!("{}", value.round() as u8),
            ScalarType::U16 => format!("{}", value.round() as u16),
            ScalarType::U32 => format!("{}", value.round() as u32),
            ScalarType::I8 => format!("{}", value.round() as i8),
            ScalarType::I16 => format!("{}", value.round() as i16),
            ScalarType::I32 => format!("{}", value.round() as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Field {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ScalarType,
    /// Number of scalar elements (PCD `COUNT`).
    pub count: usize,
    /// Byte offset inside a packed record.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct FieldSchema {
    fields: Vec<Field>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("schema is missing required field `{0}`")]
    MissingField(&'static str),
    #[error("field `{0}` appears twice")]
    DuplicateField(String),
    #[error("field `{0}` has a zero element count")]
    ZeroCount(String),
    #[error("field `{0}` must be a single scalar")]
    NotScalar(String),
}

/// Names recognized as the per-point time field, in priority order.
pub const TIME_FIELD_NAMES: [&str; 4] = ["t", "time", "timestamp", "offset_time"];

/// Which point slot a schema element feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    X,
    Y,
    Z,
    Intensity,
    Reflectivity,
    Ring,
    Time(TimeEncoding),
    /// Index into `AttributeSet::extra`.
    Extra(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeEncoding {
    /// Float seconds relative to the frame base time.
    Seconds,
    /// Integer nanoseconds relative to the frame base time.
    Nanoseconds,
    /// Float absolute seconds; offsets are taken relative to the base time.
    Absolute,
}

impl FieldSchema {
    /// Builds a schema with packed, ascending offsets.
    pub fn packed<'a>(fields: impl IntoIterator<Item = (&'a str, ScalarType, usize)>) -> Result<Self, SchemaError> {
        let mut offset = 0;
        let mut out: Vec<Field> = Vec::new();
        for (name, kind, count) in fields {
            if count == 0 {
                return Err(SchemaError::ZeroCount(name.to_string()));
            }
            if out.iter().any(|f| f.name == name) {
                return Err(SchemaError::DuplicateField(name.to_string()));
            }
            out.push(Field { name: name.to_string(), kind, count, offset });
            offset += kind.size() * count;
        }
        let schema = Self { fields: out };
        for axis in ["x", "y", "z"] {
            match schema.field(axis) {
                None => return Err(SchemaError::MissingField(axis)),
                Some(f) if f.count != 1 => return Err(SchemaError::NotScalar(axis.to_string())),
                Some(_) => {}
            }
        }
        Ok(schema)
    }

    pub fn xyz() -> Self {
        Self::packed([("x", ScalarType::F32, 1), ("y", ScalarType::F32, 1), ("z", ScalarType::F32, 1)]).unwrap()
    }

    /// x, y, z plus a float `t` time offset in seconds.
    pub fn xyz_time() -> Self {
        Self::packed([
            ("x", ScalarType::F32, 1),
            ("y", ScalarType::F32, 1),
            ("z", ScalarType::F32, 1),
            ("t", ScalarType::F32, 1),
        ])
        .unwrap()
    }

    /// Ouster-style record: x, y, z, intensity, reflectivity, line, t.
    pub fn ouster() -> Self {
        Self::packed([
            ("x", ScalarType::F32, 1),
            ("y", ScalarType::F32, 1),
            ("z", ScalarType::F32, 1),
            ("intensity", ScalarType::F32, 1),
            ("reflectivity", ScalarType::U16, 1),
            ("line", ScalarType::U16, 1),
            ("t", ScalarType::U32, 1),
        ])
        .unwrap()
    }

    /// Livox custom-message layout: x, y, z, reflectivity, tag, line,
    /// offset_time (ns).
    pub fn livox() -> Self {
        Self::packed([
            ("x", ScalarType::F32, 1),
            ("y", ScalarType::F32, 1),
            ("z", ScalarType::F32, 1),
            ("reflectivity", ScalarType::U8, 1),
            ("tag", ScalarType::U8, 1),
            ("line", ScalarType::U8, 1),
            ("offset_time", ScalarType::U32, 1),
        ])
        .unwrap()
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn has(&self, name: &str) -> bool {
        self.field(name).is_some()
    }

    pub fn record_size(&self) -> usize {
        self.fields.iter().map(|f| f.kind.size() * f.count).sum()
    }

    pub fn time_field(&self) -> Option<&Field> {
        TIME_FIELD_NAMES.iter().find_map(|n| self.field(n).filter(|f| f.count == 1))
    }

    /// Role of every scalar element in record order, paired with its type
    /// and byte offset.
    pub fn roles(&self) -> Vec<(Role, ScalarType, usize)> {
        let time_name = self.time_field().map(|f| f.name.clone());
        let mut has_intensity = false;
        let mut has_reflectivity = false;
        let mut has_ring = false;
        let mut extra = 0;
        let mut out = Vec::new();
        for f in &self.fields {
            for k in 0..f.count {
                let offset = f.offset + k * f.kind.size();
                let scalar = f.count == 1;
                let role = match f.name.as_str() {
                    "x" if scalar => Role::X,
                    "y" if scalar => Role::Y,
                    "z" if scalar => Role::Z,
                    "intensity" if scalar && !has_intensity => {
                        has_intensity = true;
                        Role::Intensity
                    }
                    "reflectivity" if scalar && !has_reflectivity => {
                        has_reflectivity = true;
                        Role::Reflectivity
                    }
                    "ring" | "line" if scalar && !has_ring && !f.kind.is_float() => {
                        has_ring = true;
                        Role::Ring
                    }
                    name if Some(name) == time_name.as_deref() => Role::Time(if !f.kind.is_float() {
                        TimeEncoding::Nanoseconds
                    } else if name == "timestamp" {
                        TimeEncoding::Absolute
                    } else {
                        TimeEncoding::Seconds
                    }),
                    _ => {
                        extra += 1;
                        Role::Extra(extra - 1)
                    }
                };
                out.push((role, f.kind, offset));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_offsets_ascend() {
        let s = FieldSchema::ouster();
        let offsets: Vec<usize> = s.fields().iter().map(|f| f.offset).collect();
        assert_eq!(offsets, vec![0, 4, 8, 12, 16, 18, 20]);
        assert_eq!(s.record_size(), 24);
    }

    #[test]
    fn missing_xyz_rejected() {
        let err = FieldSchema::packed([("x", ScalarType::F32, 1), ("y", ScalarType::F32, 1)]).unwrap_err();
        assert_eq!(err, SchemaError::MissingField("z"));
    }

    #[test]
    fn livox_roles() {
        let roles: Vec<Role> = FieldSchema::livox().roles().into_iter().map(|r| r.0).collect();
        assert_eq!(
            roles,
            vec![
                Role::X,
                Role::Y,
                Role::Z,
                Role::Reflectivity,
                Role::Extra(0),
                Role::Ring,
                Role::Time(TimeEncoding::Nanoseconds)
            ]
        );
    }

    #[test]
    fn scalar_encoding_roundtrips() {
        for (kind, v) in [
            (ScalarType::F32, 1.5),
            (ScalarType::F64, -2.25e-7),
            (ScalarType::U8, 200.0),
            (ScalarType::U16, 65535.0),
            (ScalarType::U32, 4e9),
            (ScalarType::I8, -100.0),
            (ScalarType::I16, -30000.0),
            (ScalarType::I32, -2e9),
        ] {
            let mut buf = Vec::new();
            kind.write_le(v, &mut buf);
            assert_eq!(buf.len(), kind.size());
            assert_eq!(kind.read_le(&buf), v);
            assert_eq!(kind.format(v).parse::<f64>().unwrap(), v);
        }
    }
}
