//! Pipeline driver: every stage of the projector-camera spectral scanning
//! flow as a subcommand over capture directories.

mod cmd_bandselect;
mod cmd_eval;
mod cmd_reconstruct;
mod cmd_relight;
mod cmd_spectra;
mod cmd_synth;
mod common;

use clap::{Parser, Subcommand};
use procam::Error;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "procam", version, about = "Self-calibrating projector-camera spectral 3D scanning")]
struct Cli {
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,
    /// Worker thread cap (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic capture (images + ground-truth sidecar).
    Synth(cmd_synth::SynthArgs),
    /// Decode patterns, build tracks, run incremental reconstruction.
    Reconstruct(cmd_reconstruct::ReconstructArgs),
    /// Estimate per-point spectral reflectance from the color frames.
    Spectra(cmd_spectra::SpectraArgs),
    /// Relight a reconstructed spectral model under arbitrary lights.
    Relight(cmd_relight::RelightArgs),
    /// Exhaustive spectral band-set selection on a chart capture.
    Bandselect(cmd_bandselect::BandselectArgs),
    /// Compare a reconstruction against the ground-truth sidecar.
    Eval(cmd_eval::EvalArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: could not configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let config = match common::load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let result = match cli.command {
        Command::Synth(args) => cmd_synth::run(args, &config),
        Command::Reconstruct(args) => cmd_reconstruct::run(args, &config),
        Command::Spectra(args) => cmd_spectra::run(args, &config),
        Command::Relight(args) => cmd_relight::run(args, &config),
        Command::Bandselect(args) => cmd_bandselect::run(args, &config),
        Command::Eval(args) => cmd_eval::run(args, &config),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 = usage/config problems, 3 = numerical failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Argument(_)
        | Error::Parse { .. }
        | Error::Io(_)
        | Error::Json(_) => 2,
        Error::BehindCamera { .. }
        | Error::Degenerate(_)
        | Error::Initialization(_)
        | Error::Registration(_)
        | Error::Optimization(_) => 3,
    }
}
