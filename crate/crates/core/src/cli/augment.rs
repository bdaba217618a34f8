//! File-level degradation of PCD files and frame streams.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::manifest::{InputDescriptor, InputFormat, RunManifest};
use super::CliError;
use crate::engine::apply_chain;
use crate::io::pcd::{decode_pcd, encode_pcd, PcdEncoding};
use crate::io::stats::emit_stats;
use crate::io::stream::{read_frame_stream, FrameStreamWriter, MAGIC};
use crate::model::{FrameStats, PointCloudFrame, ScenarioConfig, Tier};

pub const STATS_FILE: &str = "stats.jsonl";

struct Input {
    path: PathBuf,
    format: InputFormat,
    encoding: Option<PcdEncoding>,
    bytes: u64,
    frames: Vec<PointCloudFrame>,
    nonfinite: Vec<usize>,
}

fn sensor_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Reads one input, sniffing the container from its first bytes. PCD
/// frames without stored metadata take `next_index` as their index.
fn load(path: &Path, next_index: u64) -> Result<Input, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let size = bytes.len() as u64;
    if bytes.starts_with(&MAGIC) {
        let mut frames = Vec::new();
        let mut nonfinite = Vec::new();
        let mut reader = read_frame_stream(bytes.as_slice(), sensor_name(path));
        while let Some(frame) = reader.next() {
            frames.push(frame.map_err(|source| CliError::Stream { path: path.to_path_buf(), source })?);
            nonfinite.push(reader.last_nonfinite_dropped);
        }
        return Ok(Input { path: path.to_path_buf(), format: InputFormat::Lfrm, encoding: None, bytes: size, frames, nonfinite });
    }
    let mut read = decode_pcd(&bytes).map_err(|source| CliError::Pcd { path: path.to_path_buf(), source })?;
    if read.frame.sensor_id.is_empty() {
        read.frame.sensor_id = sensor_name(path);
    }
    if !read.has_metadata {
        read.frame.frame_index = next_index;
    }
    Ok(Input {
        path: path.to_path_buf(),
        format: InputFormat::Pcd,
        encoding: Some(read.encoding),
        bytes: size,
        frames: vec![read.frame],
        nonfinite: vec![read.nonfinite_dropped],
    })
}

fn write_output(input: &Input, frames: &[PointCloudFrame], path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    match input.format {
        InputFormat::Pcd => {
            let encoding = input.encoding.unwrap_or(PcdEncoding::Binary);
            out.write_all(&encode_pcd(&frames[0], encoding)).map_err(|e| CliError::io(path, e))?;
        }
        InputFormat::Lfrm => {
            let mut writer = FrameStreamWriter::new(&mut out);
            for f in frames {
                writer.write_frame(f).map_err(|source| CliError::Stream { path: path.to_path_buf(), source })?;
            }
        }
    }
    out.flush().map_err(|e| CliError::io(path, e))
}

/// Degrades every frame of `inputs` at `tier` and writes, into `output`:
/// one file per input under its original name and container format,
/// `stats.jsonl` with one record per frame in input order, and
/// `manifest.json`. Frames are processed in parallel; results do not
/// depend on the worker count.
pub fn augment(inputs: &[PathBuf], cfg: &ScenarioConfig, tier: Tier, output: &Path) -> Result<RunManifest, CliError> {
    if inputs.is_empty() {
        return Err(CliError::Usage("augment needs at least one input".into()));
    }
    let mut names = HashSet::new();
    for p in inputs {
        let name = p.file_name().ok_or_else(|| CliError::Usage(format!("{}: not a file path", p.display())))?;
        if !names.insert(name.to_owned()) {
            return Err(CliError::Usage(format!("two inputs share the file name {}", name.to_string_lossy())));
        }
    }

    let mut loaded: Vec<Input> = Vec::with_capacity(inputs.len());
    let mut next_index = 0u64;
    for p in inputs {
        let input = load(p, next_index)?;
        next_index += input.frames.len() as u64;
        loaded.push(input);
    }

    let jobs: Vec<(usize, usize)> =
        loaded.iter().enumerate().flat_map(|(i, input)| (0..input.frames.len()).map(move |k| (i, k))).collect();
    let results = jobs
        .par_iter()
        .map(|&(i, k)| {
            let input = &loaded[i];
            apply_chain(&input.frames[k], cfg, tier, None)
                .map(|(frame, mut stats)| {
                    stats.nonfinite_dropped = input.nonfinite[k];
                    (frame, stats)
                })
                .map_err(|source| CliError::Chain {
                    path: input.path.clone(),
                    frame_index: input.frames[k].frame_index,
                    source,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    fs::create_dir_all(output).map_err(|e| CliError::io(output, e))?;
    let mut results = results.into_iter();
    let mut all_stats: Vec<FrameStats> = Vec::with_capacity(jobs.len());
    for input in &loaded {
        let (frames, stats): (Vec<_>, Vec<_>) = results.by_ref().take(input.frames.len()).unzip();
        let name = input.path.file_name().expect("checked above");
        write_output(input, &frames, &output.join(name))?;
        all_stats.extend(stats);
    }
    let stats_path = output.join(STATS_FILE);
    let file = File::create(&stats_path).map_err(|e| CliError::io(&stats_path, e))?;
    let mut sink = BufWriter::new(file);
    emit_stats(&all_stats, &mut sink).and_then(|_| sink.flush()).map_err(|e| CliError::io(&stats_path, e))?;

    let mut manifest = RunManifest::new("augment", cfg);
    manifest.tier = Some(tier);
    for input in &loaded {
        let abs = fs::canonicalize(&input.path).map_err(|e| CliError::io(&input.path, e))?;
        manifest.inputs.push(InputDescriptor {
            path: abs.to_string_lossy().into_owned(),
            format: input.format,
            encoding: input.encoding,
            frames: input.frames.len(),
            bytes: input.bytes,
        });
    }
    manifest.write(output)?;
    Ok(manifest)
}

/// Repeats the run recorded in `manifest`, checking that each input still
/// has the recorded size.
pub fn augment_from_manifest(manifest: &RunManifest, output: &Path) -> Result<RunManifest, CliError> {
    let tier = manifest.tier.ok_or_else(|| CliError::Manifest("no tier recorded".into()))?;
    let cfg = manifest.scenario()?;
    let mut inputs = Vec::with_capacity(manifest.inputs.len());
    for d in &manifest.inputs {
        let path = PathBuf::from(&d.path);
        let len = fs::metadata(&path).map_err(|e| CliError::io(&path, e))?.len();
        if len != d.bytes {
            return Err(CliError::Manifest(format!("{} is {len} bytes, manifest recorded {}", d.path, d.bytes)));
        }
        inputs.push(path);
    }
    augment(&inputs, &cfg, tier, output)
}

/// First frame of a PCD file or stream, used for sensor detection.
pub fn first_frame(path: &Path) -> Result<PointCloudFrame, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut head = Vec::new();
    reader.by_ref().take(MAGIC.len() as u64).read_to_end(&mut head).map_err(|e| CliError::io(path, e))?;
    if head == MAGIC {
        let chained = head.as_slice().chain(reader);
        return match read_frame_stream(chained, sensor_name(path)).next() {
            Some(frame) => frame.map_err(|source| CliError::Stream { path: path.to_path_buf(), source }),
            None => Err(CliError::Usage(format!("{}: stream has no frames", path.display()))),
        };
    }
    let mut bytes = head;
    reader.read_to_end(&mut bytes).map_err(|e| CliError::io(path, e))?;
    let read = decode_pcd(&bytes).map_err(|source| CliError::Pcd { path: path.to_path_buf(), source })?;
    Ok(read.frame)
}
