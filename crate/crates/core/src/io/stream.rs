//! Length-prefixed frame stream.
//!
//! Each record is `"LFRM"`, a little-endian `u32` payload length, then the
//! payload: `frame_index: u64`, `t0: f64`, `point_count: u32`,
//! `schema_id: u16`, followed by `point_count` packed little-endian point
//! records laid out per the schema id. Time offsets are stored as `f32`
//! seconds.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::pcd::{point_to_values, values_to_point};
use super::schema::{FieldSchema, Role, ScalarType};
use crate::model::PointCloudFrame;

pub const MAGIC: [u8; 4] = *b"LFRM";
const FRAME_HEADER_LEN: usize = 8 + 8 + 4 + 2;

/// Fixed point layouts a stream record can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum StreamSchema {
    /// x, y, z, t
    Xyz = 0,
    /// x, y, z, intensity, t
    XyzIntensity = 1,
    /// x, y, z, intensity, reflectivity (u16), line (u16), t
    Ouster = 2,
    /// x, y, z, reflectivity (u8), tag (u8), line (u8), t
    Livox = 3,
}

impl StreamSchema {
    pub fn from_id(id: u16) -> Option<Self> {
        Some(match id {
            0 => StreamSchema::Xyz,
            1 => StreamSchema::XyzIntensity,
            2 => StreamSchema::Ouster,
            3 => StreamSchema::Livox,
            _ => return None,
        })
    }

    pub fn id(self) -> u16 {
        self as u16
    }

    pub fn schema(self) -> FieldSchema {
        use ScalarType::*;
        let fields: &[(&str, ScalarType, usize)] = match self {
            StreamSchema::Xyz => &[("x", F32, 1), ("y", F32, 1), ("z", F32, 1), ("t", F32, 1)],
            StreamSchema::XyzIntensity => {
                &[("x", F32, 1), ("y", F32, 1), ("z", F32, 1), ("intensity", F32, 1), ("t", F32, 1)]
            }
            StreamSchema::Ouster => &[
                ("x", F32, 1),
                ("y", F32, 1),
                ("z", F32, 1),
                ("intensity", F32, 1),
                ("reflectivity", U16, 1),
                ("line", U16, 1),
                ("t", F32, 1),
            ],
            StreamSchema::Livox => &[
                ("x", F32, 1),
                ("y", F32, 1),
                ("z", F32, 1),
                ("reflectivity", U8, 1),
                ("tag", U8, 1),
                ("line", U8, 1),
                ("t", F32, 1),
            ],
        };
        FieldSchema::packed(fields.iter().copied()).unwrap()
    }

    /// Closest layout for a frame schema; exact when the frame already uses
    /// a stream layout.
    pub fn for_schema(schema: &FieldSchema) -> Self {
        for s in [StreamSchema::Xyz, StreamSchema::XyzIntensity, StreamSchema::Ouster, StreamSchema::Livox] {
            if &s.schema() == schema {
                return s;
            }
        }
        let roles: Vec<Role> = schema.roles().into_iter().map(|r| r.0).collect();
        let has = |r: Role| roles.contains(&r);
        if schema.has("tag") {
            StreamSchema::Livox
        } else if has(Role::Reflectivity) || has(Role::Ring) {
            StreamSchema::Ouster
        } else if has(Role::Intensity) {
            StreamSchema::XyzIntensity
        } else {
            StreamSchema::Xyz
        }
    }
}

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic at byte {offset}")]
    BadMagic { offset: u64 },
    #[error("truncated record at byte {offset}")]
    Truncated { offset: u64 },
    #[error("record at byte {offset}: payload length {length} does not match {points} points of schema {schema_id}")]
    LengthMismatch { offset: u64, length: u32, points: u32, schema_id: u16 },
    #[error("record at byte {offset}: unknown schema id {schema_id}")]
    UnknownSchema { offset: u64, schema_id: u16 },
    #[error("frame has {0} points, more than a record can hold")]
    TooManyPoints(usize),
}

/// Encodes one frame as a complete record.
pub fn encode_frame(frame: &PointCloudFrame) -> Result<Vec<u8>, StreamError> {
    let layout = StreamSchema::for_schema(&frame.schema);
    let schema = layout.schema();
    let roles = schema.roles();
    let count = u32::try_from(frame.len()).map_err(|_| StreamError::TooManyPoints(frame.len()))?;
    let payload_len = FRAME_HEADER_LEN + frame.len() * schema.record_size();
    let payload_len = u32::try_from(payload_len).map_err(|_| StreamError::TooManyPoints(frame.len()))?;
    let mut out = Vec::with_capacity(8 + payload_len as usize);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&payload_len.to_le_bytes());
    out.extend_from_slice(&frame.frame_index.to_le_bytes());
    out.extend_from_slice(&frame.t0.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&layout.id().to_le_bytes());
    // Extras other than the Livox tag have no slot in a stream layout.
    let tag = extra_index_of(&frame.schema, "tag");
    let mut values = Vec::with_capacity(roles.len());
    for p in &frame.points {
        let mut p = p.clone();
        p.attributes.extra = match layout {
            StreamSchema::Livox => vec![tag.and_then(|i| p.attributes.extra.get(i).copied()).unwrap_or(0.0)],
            _ => Vec::new(),
        };
        point_to_values(&roles, &p, frame.t0, &mut values);
        for (&(_, kind, _), &v) in roles.iter().zip(&values) {
            kind.write_le(v, &mut out);
        }
    }
    Ok(out)
}

/// Position of field `name` inside `AttributeSet::extra`.
fn extra_index_of(schema: &FieldSchema, name: &str) -> Option<usize> {
    let names = schema.fields().iter().flat_map(|f| std::iter::repeat_n(f.name.as_str(), f.count));
    schema.roles().into_iter().zip(names).find_map(|(r, n)| match r.0 {
        Role::Extra(i) if n == name => Some(i),
        _ => None,
    })
}

/// Writes frames as consecutive records.
pub struct FrameStreamWriter<W> {
    inner: W,
}

impl<W: Write> FrameStreamWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn write_frame(&mut self, frame: &PointCloudFrame) -> Result<(), StreamError> {
        self.inner.write_all(&encode_frame(frame)?)?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// Iterator over the frames of a byte stream. The first error ends
/// iteration.
pub struct FrameStreamReader<R> {
    inner: R,
    sensor_id: String,
    offset: u64,
    done: bool,
    /// Non-finite points dropped from the most recent frame.
    pub last_nonfinite_dropped: usize,
}

pub fn read_frame_stream<R: Read>(inner: R, sensor_id: impl Into<String>) -> FrameStreamReader<R> {
    FrameStreamReader { inner, sensor_id: sensor_id.into(), offset: 0, done: false, last_nonfinite_dropped: 0 }
}

/// Fills `buf`, returning how many bytes were read before EOF.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(n)
}

impl<R: Read> FrameStreamReader<R> {
    fn next_record(&mut self) -> Result<Option<PointCloudFrame>, StreamError> {
        let start = self.offset;
        let mut prefix = [0u8; 8];
        let got = read_full(&mut self.inner, &mut prefix)?;
        if got == 0 {
            return Ok(None);
        }
        if got < 8 {
            return Err(StreamError::Truncated { offset: start });
        }
        if prefix[..4] != MAGIC {
            return Err(StreamError::BadMagic { offset: start });
        }
        let length = u32::from_le_bytes(prefix[4..].try_into().unwrap());
        if (length as usize) < FRAME_HEADER_LEN {
            return Err(StreamError::LengthMismatch { offset: start, length, points: 0, schema_id: 0 });
        }
        let mut payload = vec![0u8; length as usize];
        if read_full(&mut self.inner, &mut payload)? < payload.len() {
            return Err(StreamError::Truncated { offset: start });
        }
        self.offset += 8 + length as u64;

        let frame_index = u64::from_le_bytes(payload[0..8].try_into().unwrap());
        let t0 = f64::from_le_bytes(payload[8..16].try_into().unwrap());
        let points = u32::from_le_bytes(payload[16..20].try_into().unwrap());
        let schema_id = u16::from_le_bytes(payload[20..22].try_into().unwrap());
        let layout = StreamSchema::from_id(schema_id).ok_or(StreamError::UnknownSchema { offset: start, schema_id })?;
        let schema = layout.schema();
        let record = schema.record_size();
        if FRAME_HEADER_LEN + points as usize * record != length as usize {
            return Err(StreamError::LengthMismatch { offset: start, length, points, schema_id });
        }
        let roles = schema.roles();
        let mut values = Vec::with_capacity(roles.len());
        let mut frame = PointCloudFrame {
            frame_index,
            sensor_id: self.sensor_id.clone(),
            t0,
            schema: schema.clone(),
            points: Vec::with_capacity(points as usize),
        };
        for rec in payload[FRAME_HEADER_LEN..].chunks_exact(record) {
            values.clear();
            values.extend(roles.iter().map(|&(_, kind, off)| kind.read_le(&rec[off..])));
            frame.points.push(values_to_point(&roles, &values, t0));
        }
        self.last_nonfinite_dropped = frame.retain_finite();
        Ok(Some(frame))
    }
}

impl<R: Read> Iterator for FrameStreamReader<R> {
    type Item = Result<PointCloudFrame, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(frame)) => Some(Ok(frame)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}
