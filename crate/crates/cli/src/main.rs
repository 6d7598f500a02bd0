//! `dicke`: figure data, parameter scans and measurement trajectories for
//! collective-spin photon-counting simulations.

// Negated comparisons are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use commands::{CollapseArgs, PhysicalArgs, SqueezeScanArgs, StatisticsArgs, TrajectoryArgs};
use output::{Format, OutputDir, RunManifest, MANIFEST_NAME};

#[derive(Parser, Debug)]
#[command(
    name = "dicke",
    version,
    about = "Photon-counting measurement of collective atomic spins"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Generator seed (trajectory only); drawn at random and recorded when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Table format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Also write a gnuplot script per table.
    #[arg(long, global = true)]
    gnuplot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", content = "parameters", rename_all = "kebab-case")]
enum Command {
    /// Photon-number distribution of the scattered pulse and its peaks.
    Statistics(StatisticsArgs),
    /// Atomic distribution after conditioning on a photon count.
    Collapse(CollapseArgs),
    /// Seeded sequence of pulses with sampled or forced outcomes.
    Trajectory(TrajectoryArgs),
    /// Squeezing parameter over a grid of measurement strengths.
    SqueezeScan(SqueezeScanArgs),
    /// Dimensionless strengths from laboratory parameters.
    Physical(PhysicalArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
struct ReplayArgs {
    /// Manifest written by an earlier run.
    manifest: PathBuf,
    /// Compare the new outputs byte-for-byte with the recorded ones.
    #[arg(long)]
    check: bool,
}

/// Bad invocation or input document (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Replayed outputs differ from the recorded ones (exit code 3).
#[derive(Debug)]
struct ReplayMismatch(Vec<String>);

impl fmt::Display for ReplayMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "replayed outputs differ: {}", self.0.join(", "))
    }
}

impl std::error::Error for ReplayMismatch {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<dicke_core::Error>() {
            return match e {
                dicke_core::Error::Config { .. } => 1,
                dicke_core::Error::Consistency(_) => 3,
                _ => 2,
            };
        }
        if cause.is::<ReplayMismatch>() {
            return 3;
        }
    }
    1
}

/// Settings shared by all commands.
pub struct RunContext {
    pub out: OutputDir,
    pub format: Format,
    pub gnuplot: bool,
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var("DICKE_THREADS") {
        let threads: usize = value.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            usage(format!(
                "DICKE_THREADS must be a positive integer, got {value:?}"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring thread pool")?;
    }
    Ok(())
}

/// Resolves file references and the seed so the manifest alone reproduces the run.
fn normalize(command: Command, seed: Option<u64>) -> Result<(Command, Option<u64>)> {
    Ok(match command {
        Command::Trajectory(args) => {
            let args = args.resolved()?;
            (
                Command::Trajectory(args),
                Some(seed.unwrap_or_else(rand::random)),
            )
        }
        Command::Physical(args) => (Command::Physical(args.resolved()?), None),
        other => (other, None),
    })
}

fn run(command: &Command, seed: Option<u64>, ctx: &mut RunContext) -> Result<()> {
    match command {
        Command::Statistics(args) => commands::statistics(args, ctx),
        Command::Collapse(args) => commands::collapse(args, ctx),
        Command::Trajectory(args) => commands::trajectory(args, seed.expect("seed resolved"), ctx),
        Command::SqueezeScan(args) => commands::squeeze_scan(args, ctx),
        Command::Physical(args) => commands::physical(args, ctx),
        Command::Replay(_) => unreachable!("replay is dispatched separately"),
    }
}

fn write_manifest(command: &Command, seed: Option<u64>, ctx: &mut RunContext) -> Result<()> {
    let tagged = serde_json::to_value(command)?;
    let name = tagged["command"].as_str().unwrap_or_default().to_string();
    let mut parameters = match tagged.get("parameters") {
        Some(Value::Object(map)) => map.clone(),
        _ => Default::default(),
    };
    parameters.insert("format".into(), serde_json::to_value(ctx.format)?);
    parameters.insert("gnuplot".into(), Value::Bool(ctx.gnuplot));
    let manifest = RunManifest {
        command: name,
        parameters,
        seed,
        output_paths: ctx
            .out
            .written()
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        tool_version: format!("dicke {}", env!("CARGO_PKG_VERSION")),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    };
    ctx.out.write_json(MANIFEST_NAME, &manifest)?;
    Ok(())
}

fn execute(
    command: Command,
    seed: Option<u64>,
    out: &Path,
    format: Format,
    gnuplot: bool,
) -> Result<RunContext> {
    let (command, seed) = normalize(command, seed)?;
    let mut ctx = RunContext {
        out: OutputDir::create(out)?,
        format,
        gnuplot,
    };
    if gnuplot && format != Format::Csv {
        return Err(usage("--gnuplot needs --format csv"));
    }
    run(&command, seed, &mut ctx)?;
    write_manifest(&command, seed, &mut ctx)?;
    Ok(ctx)
}

fn replay(args: &ReplayArgs, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(&args.manifest)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| usage(format!("malformed manifest: {e}")))?;
    let mut parameters = manifest.parameters.clone();
    let format: Format = match parameters.remove("format") {
        Some(v) => serde_json::from_value(v).map_err(|e| usage(format!("manifest format: {e}")))?,
        None => Format::Csv,
    };
    let gnuplot = parameters
        .remove("gnuplot")
        .and_then(|v| v.as_bool())
        .unwrap_or(false);
    let command: Command = serde_json::from_value(serde_json::json!({
        "command": manifest.command,
        "parameters": parameters,
    }))
    .map_err(|e| usage(format!("manifest parameters: {e}")))?;
    if matches!(command, Command::Replay(_)) {
        return Err(usage("a manifest cannot record a replay"));
    }

    let recorded_dir = args
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    if args.check {
        let same = std::fs::canonicalize(&recorded_dir).ok() == std::fs::canonicalize(out).ok()
            && out.exists();
        if same {
            return Err(usage(
                "--check needs an --out directory different from the manifest's",
            ));
        }
    }
    let ctx = execute(command, manifest.seed, out, format, gnuplot)?;
    if args.check {
        let mut differing = Vec::new();
        for produced in ctx.out.written() {
            let name = produced.file_name().expect("file path");
            if name == MANIFEST_NAME {
                continue;
            }
            let original = recorded_dir.join(name);
            let a = std::fs::read(produced)?;
            let b = std::fs::read(&original)
                .with_context(|| format!("reading {}", original.display()))?;
            if a != b {
                differing.push(name.to_string_lossy().into_owned());
            }
        }
        if !differing.is_empty() {
            return Err(ReplayMismatch(differing).into());
        }
        eprintln!("replay matches recorded outputs");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Replay(args) => replay(args, &cli.out),
        other => execute(other.clone(), cli.seed, &cli.out, cli.format, cli.gnuplot).map(|_| ()),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
