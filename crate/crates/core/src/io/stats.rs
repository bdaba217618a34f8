//! JSON-lines stats records.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::model::FrameStats;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModuleCounts {
    pub module: String,
    pub input_count: usize,
    pub output_count: usize,
}

/// One line of a stats file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StatsRecord {
    pub frame_index: u64,
    pub sensor_id: String,
    pub input_count: usize,
    pub output_count: usize,
    pub reduction_ratio: f64,
    pub nonfinite_dropped: usize,
    /// Per-module point counts in chain order.
    pub modules: Vec<ModuleCounts>,
    /// Milliseconds per module, plus `total`.
    pub latency_ms: BTreeMap<String, f64>,
}

impl From<&FrameStats> for StatsRecord {
    fn from(s: &FrameStats) -> Self {
        let mut latency_ms: BTreeMap<String, f64> =
            s.modules.iter().map(|m| (m.module.as_str().to_string(), m.seconds * 1e3)).collect();
        latency_ms.insert("total".into(), s.total_seconds() * 1e3);
        Self {
            frame_index: s.frame_index,
            sensor_id: s.sensor_id.clone(),
            input_count: s.input_count,
            output_count: s.output_count,
            reduction_ratio: s.reduction_ratio,
            nonfinite_dropped: s.nonfinite_dropped,
            modules: s
                .modules
                .iter()
                .map(|m| ModuleCounts {
                    module: m.module.as_str().to_string(),
                    input_count: m.input_count,
                    output_count: m.output_count,
                })
                .collect(),
            latency_ms,
        }
    }
}

/// Writes one JSON object per frame, newline-terminated.
pub fn emit_stats<W: Write>(stats: &[FrameStats], mut sink: W) -> io::Result<()> {
    for s in stats {
        serde_json::to_writer(&mut sink, &StatsRecord::from(s))?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModuleId, ModuleStats};

    #[test]
    fn empty_sequence_writes_nothing() {
        let mut out = Vec::new();
        emit_stats(&[], &mut out).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn one_frame_one_line() {
        let mut s = FrameStats::new(4, "lidar_front", 1000, 640);
        s.modules.push(ModuleStats { module: ModuleId::Dropout, input_count: 1000, output_count: 640, seconds: 0.002 });
        let mut out = Vec::new();
        emit_stats(&[s], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1);
        let v: serde_json::Value = serde_json::from_str(text.trim_end()).unwrap();
        for key in ["frame_index", "sensor_id", "input_count", "output_count", "reduction_ratio", "latency_ms"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!((v["latency_ms"]["dropout"].as_f64().unwrap() - 2.0).abs() < 1e-12);
        assert!((v["reduction_ratio"].as_f64().unwrap() - 0.36).abs() < 1e-12);
    }
}
