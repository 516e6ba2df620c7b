//! Command-line front end: one subcommand per pipeline stage.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lanescope::pipeline::{run_with_threads, threads_from_env, PipelineConfig, Stage};
use lanescope::Error;

#[derive(Parser)]
#[command(
    name = "lanescope",
    version,
    about = "Lane-change interaction patterns from trajectory data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration file (JSON).
    #[arg(short, long, value_name = "PATH")]
    config: PathBuf,
    /// Override one config key by dotted path, e.g. `--set bnp.L=30`. The
    /// value is parsed as JSON, else taken as a string. Repeatable.
    #[arg(long = "set", value_name = "KEY.PATH=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scripted multi-lane traffic as highD-style track CSVs.
    Synth(Common),
    /// Parse track CSVs into per-frame scenes of every lane change.
    Ingest(Common),
    /// Compute the velocity field of every scene.
    Fields(Common),
    /// Fit the field encoder (autoencoder or linear projection).
    TrainCodec(Common),
    /// Encode fields and assemble the 12-d feature sequences.
    Encode(Common),
    /// Segment the feature sequences with the sticky HDP-HMM.
    Segment(Common),
    /// Occupancy, prototypes, lateral states, transitions and pattern curve.
    Analyze(Common),
    /// Run every stage in order.
    Pipeline(Common),
}

impl Command {
    fn split(self) -> (Stage, Common) {
        match self {
            Command::Synth(c) => (Stage::Synth, c),
            Command::Ingest(c) => (Stage::Ingest, c),
            Command::Fields(c) => (Stage::Fields, c),
            Command::TrainCodec(c) => (Stage::TrainCodec, c),
            Command::Encode(c) => (Stage::Encode, c),
            Command::Segment(c) => (Stage::Segment, c),
            Command::Analyze(c) => (Stage::Analyze, c),
            Command::Pipeline(c) => (Stage::Pipeline, c),
        }
    }
}

fn fail(e: &Error, code: u8) -> ExitCode {
    eprintln!("error: {}: {e}", e.name());
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let (stage, common) = Cli::parse().command.split();
    let cfg = match PipelineConfig::load(&common.config, &common.set) {
        Ok(c) => c,
        Err(e @ (Error::PathNotFound(_) | Error::Io(_))) => return fail(&e, 1),
        Err(e) => return fail(&e, 2),
    };
    let threads = match threads_from_env() {
        Ok(n) => n,
        Err(e) => return fail(&e, 2),
    };
    match run_with_threads(stage, &cfg, threads) {
        Ok(manifests) => {
            for m in manifests {
                eprintln!("{}: wrote {} file(s)", m.stage, m.outputs.len());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, 1),
    }
}
