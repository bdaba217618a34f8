//! PCD v0.7 reader and writer (`DATA ascii` and `DATA binary`).
//!
//! Frame metadata that PCD has no header field for (frame index, base time,
//! sensor id) travels in a comment line:
//!
//! ```text
//! # lidegrade frame_index=3 t0=1700000000.1 sensor_id=os0
//! ```

use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use super::schema::{FieldSchema, Role, ScalarType, SchemaError, TimeEncoding};
use crate::model::{AttributeSet, Point, PointCloudFrame};

/// Frame period assumed when a file carries no per-point time field.
pub const DEFAULT_FRAME_PERIOD: f64 = 0.1;

const METADATA_TAG: &str = "# lidegrade ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcdEncoding {
    Ascii,
    Binary,
}

#[derive(Debug, Error)]
pub enum PcdError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header at byte {offset}: {message}")]
    Header { offset: usize, message: String },
    #[error("unsupported PCD variant at byte {offset}: {what}")]
    Unsupported { offset: usize, what: String },
    #[error("truncated body at byte {offset}: expected {expected} points, found {found}")]
    Truncated { offset: usize, expected: usize, found: usize },
    #[error("bad value at byte {offset}: `{token}`")]
    Value { offset: usize, token: String },
    #[error("invalid schema: {0}")]
    Schema(#[from] SchemaError),
}

/// A decoded PCD file.
#[derive(Debug, Clone)]
pub struct PcdRead {
    pub frame: PointCloudFrame,
    pub encoding: PcdEncoding,
    /// Points dropped for non-finite coordinates.
    pub nonfinite_dropped: usize,
    /// Whether the file carried the frame-metadata comment.
    pub has_metadata: bool,
}

#[derive(Default)]
struct Header {
    fields: Vec<String>,
    sizes: Vec<usize>,
    types: Vec<String>,
    counts: Vec<usize>,
    width: Option<usize>,
    height: Option<usize>,
    points: Option<usize>,
    frame_index: Option<u64>,
    t0: Option<f64>,
    sensor_id: Option<String>,
}

fn header_err(offset: usize, message: impl Into<String>) -> PcdError {
    PcdError::Header { offset, message: message.into() }
}

fn parse_usize(tok: &str, offset: usize, key: &str) -> Result<usize, PcdError> {
    tok.parse().map_err(|_| header_err(offset, format!("{key}: `{tok}` is not a non-negative integer")))
}

fn parse_metadata(line: &str, header: &mut Header) {
    let rest = &line[METADATA_TAG.len()..];
    // sensor_id takes the remainder of the line so it may contain spaces.
    let (head, sensor) = match rest.find("sensor_id=") {
        Some(i) => (&rest[..i], Some(rest[i + "sensor_id=".len()..].to_string())),
        None => (rest, None),
    };
    for kv in head.split_whitespace() {
        if let Some(v) = kv.strip_prefix("frame_index=") {
            header.frame_index = v.parse().ok();
        } else if let Some(v) = kv.strip_prefix("t0=") {
            header.t0 = v.parse().ok();
        }
    }
    header.sensor_id = sensor;
}

/// Decodes a complete PCD file held in memory.
pub fn decode_pcd(bytes: &[u8]) -> Result<PcdRead, PcdError> {
    let mut header = Header::default();
    let mut pos = 0usize;
    let encoding;
    loop {
        if pos >= bytes.len() {
            return Err(header_err(pos, "missing DATA line"));
        }
        let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |i| pos + i);
        let line_offset = pos;
        let line = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| header_err(line_offset, "header is not UTF-8"))?
            .trim_end_matches('\r');
        pos = (end + 1).min(bytes.len());
        if line.starts_with(METADATA_TAG) {
            parse_metadata(line, &mut header);
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or_default();
        let vals: Vec<&str> = toks.collect();
        match key {
            "VERSION" | "VIEWPOINT" => {}
            "FIELDS" => header.fields = vals.iter().map(|s| s.to_string()).collect(),
            "SIZE" => {
                header.sizes = vals.iter().map(|v| parse_usize(v, line_offset, key)).collect::<Result<_, _>>()?
            }
            "TYPE" => header.types = vals.iter().map(|s| s.to_string()).collect(),
            "COUNT" => {
                header.counts = vals.iter().map(|v| parse_usize(v, line_offset, key)).collect::<Result<_, _>>()?
            }
            "WIDTH" | "HEIGHT" | "POINTS" => {
                let v = match vals.as_slice() {
                    [v] => parse_usize(v, line_offset, key)?,
                    _ => return Err(header_err(line_offset, format!("{key} expects one value"))),
                };
                match key {
                    "WIDTH" => header.width = Some(v),
                    "HEIGHT" => header.height = Some(v),
                    _ => header.points = Some(v),
                }
            }
            "DATA" => {
                encoding = match vals.as_slice() {
                    ["ascii"] => PcdEncoding::Ascii,
                    ["binary"] => PcdEncoding::Binary,
                    [other] => {
                        return Err(PcdError::Unsupported { offset: line_offset, what: format!("DATA {other}") })
                    }
                    _ => return Err(header_err(line_offset, "DATA expects one value")),
                };
                break;
            }
            other => return Err(header_err(line_offset, format!("unknown header key `{other}`"))),
        }
    }

    let n_fields = header.fields.len();
    if n_fields == 0 {
        return Err(header_err(0, "FIELDS missing"));
    }
    if header.counts.is_empty() {
        header.counts = vec![1; n_fields];
    }
    if header.sizes.len() != n_fields || header.types.len() != n_fields || header.counts.len() != n_fields {
        return Err(header_err(0, "FIELDS, SIZE, TYPE and COUNT lengths differ"));
    }
    let mut spec = Vec::with_capacity(n_fields);
    for i in 0..n_fields {
        let kind = ScalarType::from_pcd(&header.types[i], header.sizes[i]).ok_or_else(|| PcdError::Unsupported {
            offset: 0,
            what: format!("field `{}` TYPE {} SIZE {}", header.fields[i], header.types[i], header.sizes[i]),
        })?;
        spec.push((header.fields[i].as_str(), kind, header.counts[i]));
    }
    let schema = FieldSchema::packed(spec)?;
    let n_points = match (header.points, header.width, header.height) {
        (Some(p), _, _) => p,
        (None, Some(w), h) => w * h.unwrap_or(1),
        _ => return Err(header_err(0, "neither POINTS nor WIDTH given")),
    };

    let roles = schema.roles();
    let mut raw: Vec<f64> = Vec::with_capacity(n_points * roles.len());
    match encoding {
        PcdEncoding::Binary => {
            let record = schema.record_size();
            let body = &bytes[pos..];
            let available = if record == 0 { 0 } else { body.len() / record };
            if available < n_points {
                return Err(PcdError::Truncated { offset: pos + available * record, expected: n_points, found: available });
            }
            for i in 0..n_points {
                let rec = &body[i * record..(i + 1) * record];
                raw.extend(roles.iter().map(|&(_, kind, off)| kind.read_le(&rec[off..])));
            }
        }
        PcdEncoding::Ascii => {
            let mut found = 0;
            let mut line_start = pos;
            for line in bytes[pos..].split(|&b| b == b'\n') {
                let offset = line_start;
                line_start += line.len() + 1;
                if found == n_points {
                    break;
                }
                let text = std::str::from_utf8(line).map_err(|_| PcdError::Value { offset, token: "<non-UTF-8>".into() })?;
                if text.trim().is_empty() {
                    continue;
                }
                let toks: Vec<&str> = text.split_whitespace().collect();
                if toks.len() != roles.len() {
                    return Err(PcdError::Value { offset, token: text.trim().to_string() });
                }
                for (tok, &(_, kind, _)) in toks.iter().zip(&roles) {
                    raw.push(parse_scalar(kind, tok).ok_or_else(|| PcdError::Value { offset, token: tok.to_string() })?);
                }
                found += 1;
            }
            if found < n_points {
                return Err(PcdError::Truncated { offset: bytes.len(), expected: n_points, found });
            }
        }
    }

    let has_metadata = header.frame_index.is_some() || header.t0.is_some() || header.sensor_id.is_some();
    let mut frame = PointCloudFrame {
        frame_index: header.frame_index.unwrap_or(0),
        sensor_id: header.sensor_id.unwrap_or_default(),
        t0: header.t0.unwrap_or(0.0),
        schema,
        points: Vec::with_capacity(n_points),
    };
    let time_role = roles.iter().find_map(|r| match r.0 {
        Role::Time(enc) => Some(enc),
        _ => None,
    });
    if time_role == Some(TimeEncoding::Absolute) && header.t0.is_none() {
        let stride = roles.len();
        let slot = roles.iter().position(|r| matches!(r.0, Role::Time(_))).unwrap();
        frame.t0 = (0..n_points).map(|i| raw[i * stride + slot]).filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
        if !frame.t0.is_finite() {
            frame.t0 = 0.0;
        }
    }
    for i in 0..n_points {
        let values = &raw[i * roles.len()..(i + 1) * roles.len()];
        let mut p = values_to_point(&roles, values, frame.t0);
        if time_role.is_none() {
            p.time_offset = DEFAULT_FRAME_PERIOD * i as f64 / n_points as f64;
        }
        frame.points.push(p);
    }
    let nonfinite_dropped = frame.retain_finite();
    Ok(PcdRead { frame, encoding, nonfinite_dropped, has_metadata })
}

fn parse_scalar(kind: ScalarType, tok: &str) -> Option<f64> {
    match kind {
        ScalarType::F32 => tok.parse::<f32>().ok().map(f64::from),
        ScalarType::F64 => tok.parse::<f64>().ok(),
        _ => tok.parse::<i64>().ok().map(|v| v as f64),
    }
}

pub(crate) fn values_to_point(roles: &[(Role, ScalarType, usize)], values: &[f64], t0: f64) -> Point {
    let mut position = Vector3::zeros();
    let mut time_offset = 0.0;
    let mut attributes = AttributeSet::default();
    for (&(role, _, _), &v) in roles.iter().zip(values) {
        match role {
            Role::X => position.x = v,
            Role::Y => position.y = v,
            Role::Z => position.z = v,
            Role::Intensity => attributes.intensity = Some(v),
            Role::Reflectivity => attributes.reflectivity = Some(v),
            Role::Ring => attributes.ring = Some(v as u16),
            Role::Time(TimeEncoding::Seconds) => time_offset = v,
            Role::Time(TimeEncoding::Nanoseconds) => time_offset = v * 1e-9,
            Role::Time(TimeEncoding::Absolute) => time_offset = v - t0,
            Role::Extra(_) => attributes.extra.push(v),
        }
    }
    Point { position, time_offset, attributes }
}

pub(crate) fn point_to_values(roles: &[(Role, ScalarType, usize)], p: &Point, t0: f64, out: &mut Vec<f64>) {
    out.clear();
    for &(role, _, _) in roles {
        out.push(match role {
            Role::X => p.position.x,
            Role::Y => p.position.y,
            Role::Z => p.position.z,
            Role::Intensity => p.attributes.intensity.unwrap_or(0.0),
            Role::Reflectivity => p.attributes.reflectivity.unwrap_or(0.0),
            Role::Ring => p.attributes.ring.map_or(0.0, f64::from),
            Role::Time(TimeEncoding::Seconds) => p.time_offset,
            Role::Time(TimeEncoding::Nanoseconds) => (p.time_offset * 1e9).round(),
            Role::Time(TimeEncoding::Absolute) => t0 + p.time_offset,
            Role::Extra(i) => p.attributes.extra.get(i).copied().unwrap_or(0.0),
        });
    }
}

/// Header text for `frame`, ending with the `DATA` line.
pub fn pcd_header(frame: &PointCloudFrame, encoding: PcdEncoding) -> String {
    let fields = frame.schema.fields();
    let join = |f: &dyn Fn(&super::schema::Field) -> String| fields.iter().map(f).collect::<Vec<_>>().join(" ");
    let n = frame.len();
    format!(
        "# .PCD v0.7 - Point Cloud Data file format\n\
         {METADATA_TAG}frame_index={} t0={} sensor_id={}\n\
         VERSION 0.7\n\
         FIELDS {}\nSIZE {}\nTYPE {}\nCOUNT {}\n\
         WIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {n}\nDATA {}\n",
        frame.frame_index,
        frame.t0,
        frame.sensor_id.replace('\n', " "),
        join(&|f| f.name.clone()),
        join(&|f| f.kind.size().to_string()),
        join(&|f| f.kind.pcd_code().0.to_string()),
        join(&|f| f.count.to_string()),
        match encoding {
            PcdEncoding::Ascii => "ascii",
            PcdEncoding::Binary => "binary",
        }
    )
}

pub fn encode_pcd(frame: &PointCloudFrame, encoding: PcdEncoding) -> Vec<u8> {
    let roles = frame.schema.roles();
    let mut out = pcd_header(frame, encoding).into_bytes();
    let mut values = Vec::with_capacity(roles.len());
    match encoding {
        PcdEncoding::Binary => {
            out.reserve(frame.len() * frame.schema.record_size());
            for p in &frame.points {
                point_to_values(&roles, p, frame.t0, &mut values);
                for (&(_, kind, _), &v) in roles.iter().zip(&values) {
                    kind.write_le(v, &mut out);
                }
            }
        }
        PcdEncoding::Ascii => {
            for p in &frame.points {
                point_to_values(&roles, p, frame.t0, &mut values);
                let line: Vec<String> = roles.iter().zip(&values).map(|(&(_, kind, _), &v)| kind.format(v)).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    out
}

pub fn write_pcd(frame: &PointCloudFrame, path: impl AsRef<Path>, encoding: PcdEncoding) -> Result<(), PcdError> {
    fs::write(path, encode_pcd(frame, encoding))?;
    Ok(())
}

/// Reads one PCD file with ingestion details.
pub fn read_pcd_report(path: impl AsRef<Path>) -> Result<PcdRead, PcdError> {
    let path = path.as_ref();
    let mut read = decode_pcd(&fs::read(path)?)?;
    if read.frame.sensor_id.is_empty() {
        read.frame.sensor_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    Ok(read)
}

/// Reads the frames stored in a PCD file (one frame per file).
pub fn read_pcd(path: impl AsRef<Path>) -> Result<Vec<PointCloudFrame>, PcdError> {
    Ok(vec![read_pcd_report(path)?.frame])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_frame() -> PointCloudFrame {
        let mut f = PointCloudFrame::new(
            7,
            "os0 front",
            1234.5,
            (0..5)
                .map(|i| {
                    let mut p = Point::new(i as f64 * 0.5, -1.25, 2.0, i as f64 * 0.01);
                    p.attributes.intensity = Some(10.0 * i as f64);
                    p.attributes.reflectivity = Some(3.0);
                    p.attributes.ring = Some(i as u16);
                    p
                })
                .collect(),
        );
        f.schema = FieldSchema::ouster();
        f
    }

    #[test]
    fn binary_roundtrip() {
        let f = sample_frame();
        let back = decode_pcd(&encode_pcd(&f, PcdEncoding::Binary)).unwrap();
        assert!(back.has_metadata);
        assert_eq!(back.encoding, PcdEncoding::Binary);
        assert_eq!(back.frame.sensor_id, "os0 front");
        assert_eq!(back.frame.len(), 5);
        for (a, b) in f.points.iter().zip(&back.frame.points) {
            assert_eq!(a.position, b.position);
            assert_eq!(a.attributes, b.attributes);
            assert!((a.time_offset - b.time_offset).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_frame_is_valid() {
        let f = PointCloudFrame::new(0, "s", 0.0, vec![]);
        for enc in [PcdEncoding::Ascii, PcdEncoding::Binary] {
            let back = decode_pcd(&encode_pcd(&f, enc)).unwrap();
            assert!(back.frame.is_empty());
        }
    }

    #[test]
    fn binary_size_is_header_plus_records() {
        let f = sample_frame();
        let bytes = encode_pcd(&f, PcdEncoding::Binary);
        assert_eq!(bytes.len(), pcd_header(&f, PcdEncoding::Binary).len() + 5 * 24);
    }

    #[test]
    fn truncated_binary_body() {
        let f = sample_frame();
        let mut bytes = encode_pcd(&f, PcdEncoding::Binary);
        bytes.truncate(bytes.len() - 10);
        match decode_pcd(&bytes) {
            Err(PcdError::Truncated { expected: 5, found: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_ascii_body() {
        let mut text = String::from("FIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nWIDTH 100\nHEIGHT 1\nPOINTS 100\nDATA ascii\n");
        for i in 0..90 {
            text.push_str(&format!("{i} 0 0\n"));
        }
        match decode_pcd(text.as_bytes()) {
            Err(PcdError::Truncated { expected: 100, found: 90, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn compressed_is_unsupported() {
        let text = "FIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nPOINTS 0\nDATA binary_compressed\n";
        assert!(matches!(decode_pcd(text.as_bytes()), Err(PcdError::Unsupported { .. })));
    }

    #[test]
    fn malformed_header_reports_offset() {
        let text = "FIELDS x y z\nSIZE 4 4 four\n";
        match decode_pcd(text.as_bytes()) {
            Err(PcdError::Header { offset: 13, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_time_field_is_synthesized_and_nan_dropped() {
        let text = "FIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nWIDTH 4\nHEIGHT 1\nDATA ascii\n1 0 0\nnan nan nan\n2 0 0\n3 0 0\n";
        let read = decode_pcd(text.as_bytes()).unwrap();
        assert_eq!(read.nonfinite_dropped, 1);
        let t: Vec<f64> = read.frame.points.iter().map(|p| p.time_offset).collect();
        let expected: Vec<f64> = [0.0, 2.0, 3.0].iter().map(|i| DEFAULT_FRAME_PERIOD * i / 4.0).collect();
        assert_eq!(t, expected);
        approx::assert_abs_diff_eq!(t[2], 0.075, epsilon = 1e-15);
    }

    #[test]
    fn unknown_fields_kept_as_extras() {
        let text = "FIELDS x y z curvature rgb\nSIZE 4 4 4 4 4\nTYPE F F F F U\nCOUNT 1 1 1 1 1\nPOINTS 1\nDATA ascii\n1 2 3 0.5 16777215\n";
        let read = decode_pcd(text.as_bytes()).unwrap();
        assert_eq!(read.frame.points[0].attributes.extra, vec![0.5, 16777215.0]);
        let again = decode_pcd(&encode_pcd(&read.frame, PcdEncoding::Ascii)).unwrap();
        assert_eq!(again.frame.points, read.frame.points);
    }
}
