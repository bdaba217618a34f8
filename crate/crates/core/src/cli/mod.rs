//! `lidegrade` command-line front end.

pub mod augment;
pub mod bench;
pub mod manifest;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::engine::ChainError;
use crate::eval::ape::{compute_ape, ApeError, DEFAULT_MAX_DT};
use crate::eval::sweep::{render_table, severity_sweep_with_profile, PathShape, SweepError, TrajectorySpec};
use crate::eval::trajectory::{Trajectory, TrajectoryError};
use crate::io::config::{parse_scenario_config_with_overrides, ConfigError};
use crate::io::detect::{detect_sensor_profile, ProfileClass, SensorProfile};
use crate::io::pcd::PcdError;
use crate::io::schema::{FieldSchema, SchemaError};
use crate::io::stream::StreamError;
use crate::model::{ScenarioConfig, Tier};

pub use augment::{augment, augment_from_manifest, STATS_FILE};
pub use bench::{run_bench, synthetic_frame, BenchReport, BenchStatus};
pub use manifest::{InputDescriptor, InputFormat, RunManifest, SweepSettings, MANIFEST_FILE};

pub const SWEEP_JSON: &str = "sweep.json";
pub const SWEEP_TABLE: &str = "sweep.txt";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Pcd { path: PathBuf, source: PcdError },
    #[error("{}: {source}", path.display())]
    Stream { path: PathBuf, source: StreamError },
    #[error("{}, frame {frame_index}: {source}", path.display())]
    Chain { path: PathBuf, frame_index: u64, source: ChainError },
    #[error(transparent)]
    Bench(#[from] ChainError),
    #[error("sweep: {0}")]
    Sweep(#[from] SweepError),
    #[error("every sweep cell failed")]
    SweepFailed,
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("ape: {0}")]
    Ape(#[from] ApeError),
    #[error("schema: {0}")]
    Schema(#[from] SchemaError),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{0}")]
    Usage(String),
    #[error("thread pool: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lidegrade", version, about = "Seeded lidar point-cloud degradation and robustness evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Scenario config (YAML).
    #[arg(long, global = true, env = "LIDEGRADE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Global seed; same as --set pipeline.seed=N.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// light, moderate, heavy or extreme.
    #[arg(long, global = true)]
    pub tier: Option<Tier>,
    /// Worker threads. Outputs do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Config override, e.g. augmentations.noise.heavy.sigma=0.04. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Degrade PCD files or frame streams.
    Augment {
        #[arg(required_unless_present = "manifest")]
        inputs: Vec<PathBuf>,
        /// Repeat the run recorded in a manifest.
        #[arg(long, conflicts_with = "inputs")]
        manifest: Option<PathBuf>,
    },
    /// Odometry robustness across severity tiers on a synthetic scene.
    Sweep(SweepArgs),
    /// Absolute pose error between two TUM trajectories.
    Eval {
        reference: PathBuf,
        estimate: PathBuf,
        /// Rigid alignment before measuring.
        #[arg(long)]
        align: bool,
        /// Largest timestamp difference for pose pairing (seconds).
        #[arg(long, default_value_t = DEFAULT_MAX_DT)]
        max_dt: f64,
    },
    /// Time the chain on a synthetic frame.
    Bench {
        #[arg(long, default_value_t = 100_000)]
        points: usize,
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        #[arg(long, default_value_t = 5)]
        warmup: usize,
    },
    /// Print the inferred sensor profile of a file.
    Detect { input: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Line,
    Arc,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 0)]
    pub scene_seed: u64,
    /// Comma-separated tiers; defaults to --tier or all four.
    #[arg(long, value_delimiter = ',')]
    pub tiers: Vec<Tier>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 16)]
    pub frames: usize,
    #[arg(long, value_enum, default_value_t = ShapeArg::Line)]
    pub shape: ShapeArg,
    /// Line length (m).
    #[arg(long, default_value_t = 3.0)]
    pub length: f64,
    /// Arc radius (m).
    #[arg(long, default_value_t = 4.0)]
    pub radius: f64,
    /// Arc turn (degrees).
    #[arg(long, default_value_t = 30.0)]
    pub angle_deg: f64,
    /// Simulated sensor class.
    #[arg(long, default_value = "generic")]
    pub profile: ProfileClass,
    /// Repeat the sweep recorded in a manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Scenario config from --config, --set and --seed, in that order.
pub fn resolve_config(g: &GlobalArgs) -> Result<ScenarioConfig, CliError> {
    let text = match &g.config {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
        None => String::new(),
    };
    let mut overrides = g.set.clone();
    if let Some(seed) = g.seed {
        overrides.push(format!("pipeline.seed={seed}"));
    }
    Ok(parse_scenario_config_with_overrides(&text, &overrides)?)
}

fn profile_for(class: ProfileClass) -> SensorProfile {
    let schema = match class {
        ProfileClass::OusterLike => FieldSchema::ouster(),
        ProfileClass::LivoxAviaLike | ProfileClass::LivoxMid360Like => FieldSchema::livox(),
        ProfileClass::Generic => FieldSchema::xyz_time(),
    };
    SensorProfile::for_class(class, schema)
}

fn print_json<T: serde::Serialize>(out: &mut (dyn Write + Send), value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    writeln!(out, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn require_output(g: &GlobalArgs) -> Result<&Path, CliError> {
    g.output.as_deref().ok_or_else(|| CliError::Usage("--output is required".into()))
}

fn cmd_sweep(g: &GlobalArgs, args: &SweepArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let (cfg, settings) = match &args.manifest {
        Some(path) => {
            let m = RunManifest::read(path)?;
            let settings = m.sweep.clone().ok_or_else(|| CliError::Manifest("no sweep settings recorded".into()))?;
            (m.scenario()?, settings)
        }
        None => {
            let tiers = match (&args.tiers[..], g.tier) {
                ([], Some(t)) => vec![t],
                ([], None) => Tier::ALL.to_vec(),
                (list, _) => list.to_vec(),
            };
            let shape = match args.shape {
                ShapeArg::Line => PathShape::Line { length: args.length },
                ShapeArg::Arc => PathShape::Arc { radius: args.radius, angle_deg: args.angle_deg },
            };
            let trajectory = TrajectorySpec { shape, frames: args.frames, ..TrajectorySpec::default() };
            let settings =
                SweepSettings { scene_seed: args.scene_seed, repeats: args.repeats, tiers, trajectory, profile: args.profile };
            (resolve_config(g)?, settings)
        }
    };
    let table = severity_sweep_with_profile(
        settings.scene_seed,
        &settings.trajectory,
        &cfg,
        &settings.tiers,
        settings.repeats,
        &profile_for(settings.profile),
    )?;
    for cell in &table.cells {
        for e in &cell.errors {
            writeln!(err, "warning: {} repeat failed: {e}", cell.tier).ok();
        }
    }
    match &g.output {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            let json = dir.join(SWEEP_JSON);
            let text = serde_json::to_string_pretty(&table).expect("table serializes");
            fs::write(&json, text + "\n").map_err(|e| CliError::io(&json, e))?;
            let txt = dir.join(SWEEP_TABLE);
            fs::write(&txt, render_table(&table)).map_err(|e| CliError::io(&txt, e))?;
            let mut m = RunManifest::new("sweep", &cfg);
            m.sweep = Some(settings);
            m.write(dir)?;
            write!(out, "{}", render_table(&table)).ok();
        }
        None => print_json(out, &table)?,
    }
    if table.all_failed() {
        return Err(CliError::SweepFailed);
    }
    Ok(())
}

/// Runs a parsed command line, writing reports to `out` and warnings to
/// `err`.
pub fn run(cli: &Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match cli.global.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(|| dispatch(cli, out, err)),
        None => dispatch(cli, out, err),
    }
}

fn dispatch(cli: &Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Augment { inputs, manifest } => {
            let dir = require_output(g)?;
            let m = match manifest {
                Some(path) => {
                    if g.config.is_some() || g.seed.is_some() || g.tier.is_some() || !g.set.is_empty() {
                        return Err(CliError::Usage("--manifest fixes the config; drop --config/--seed/--tier/--set".into()));
                    }
                    augment_from_manifest(&RunManifest::read(path)?, dir)?
                }
                None => {
                    let tier = g.tier.ok_or_else(|| CliError::Usage("augment needs --tier".into()))?;
                    augment(inputs, &resolve_config(g)?, tier, dir)?
                }
            };
            let frames: usize = m.inputs.iter().map(|i| i.frames).sum();
            writeln!(err, "augmented {frames} frames into {}", dir.display()).ok();
            Ok(())
        }
        Command::Sweep(args) => cmd_sweep(g, args, out, err),
        Command::Eval { reference, estimate, align, max_dt } => {
            let r = Trajectory::read_tum(reference)?;
            let e = Trajectory::read_tum(estimate)?;
            print_json(out, &compute_ape(&r, &e, *align, *max_dt)?)
        }
        Command::Bench { points, iterations, warmup } => {
            if *iterations == 0 {
                return Err(CliError::Usage("--iterations must be at least 1".into()));
            }
            let cfg = resolve_config(g)?;
            let report = run_bench(&cfg, g.tier.unwrap_or(Tier::Heavy), *points, *iterations, *warmup)?;
            print_json(out, &report)
        }
        Command::Detect { input } => {
            let frame = augment::first_frame(input)?;
            print_json(out, &detect_sensor_profile(&frame.schema, Some(&frame))?)
        }
    }
}

/// Process entry point: exit 0 on success, 1 after printing a diagnostic.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = io::stdout();
    let mut stderr = io::stderr();
    match run(&cli, &mut stdout, &mut stderr) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            writeln!(stderr, "error: {e}").ok();
            ExitCode::FAILURE
        }
    }
}
