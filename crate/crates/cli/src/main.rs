//! Experiment runner for jump-sparse super-resolution.
//!
//! Stages: `simulate` (HR -> degraded LR), `solve` (LR -> SR sweep),
//! `evaluate` (SR vs GT metrics), `bench` (the whole pipeline as a
//! comparison table). Exit codes: 0 success, 1 validation error, 2 I/O
//! error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use l0sr::error::Error;

use commands::EvaluateOptions;
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "l0sr", version, about = "l0-gradient super-resolution experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file providing defaults (flat `key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override single keys, e.g. `--set solver.mu=0.02` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print every supported key with its default and exit.
    #[arg(long)]
    explain_keys: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        for entry in &self.set {
            let (key, value) = entry
                .split_once('=')
                .ok_or_else(|| Error::config(format!("--set `{entry}`: expected KEY=VALUE")))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Degrade an HR image (or synthetic pattern) into LR data.
    Simulate(ConfigArgs),
    /// Reconstruct SR images for every configured (variant, mu).
    Solve(ConfigArgs),
    /// Score a reconstruction against a ground-truth image.
    Evaluate {
        /// Reconstruction (PNG/PGM/f64).
        sr: PathBuf,
        /// Ground truth (PNG/PGM/f64).
        gt: PathBuf,
        /// Otsu-binarize both and add mask metrics.
        #[arg(long)]
        binarize: bool,
        /// Center-crop this border width off both images first.
        #[arg(long, default_value_t = 0)]
        crop: usize,
        /// Write a k-means label map with this many classes.
        #[arg(long)]
        kmeans_k: Option<usize>,
        /// Seed for the k-means initialization.
        #[arg(long, default_value_t = 0)]
        kmeans_seed: u64,
        /// Output directory for the report files (default: next to `sr`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate + solve + evaluate the whole sweep into one table.
    Bench(ConfigArgs),
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(args) | Command::Solve(args) | Command::Bench(args)
            if args.explain_keys =>
        {
            print!("{}", config::describe_keys());
            Ok(())
        }
        Command::Simulate(args) => commands::cmd_simulate(&args.build()?),
        Command::Solve(args) => commands::cmd_solve(&args.build()?),
        Command::Bench(args) => commands::cmd_bench(&args.build()?),
        Command::Evaluate {
            sr,
            gt,
            binarize,
            crop,
            kmeans_k,
            kmeans_seed,
            out,
        } => {
            let opts = EvaluateOptions {
                binarize: *binarize,
                crop: *crop,
                kmeans_k: *kmeans_k,
                kmeans_seed: *kmeans_seed,
                out_dir: out.clone(),
            };
            commands::cmd_evaluate(sr, gt, &opts)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Config(_) | Error::Dimension(_) => 1,
                Error::Io(_) | Error::Format(_) => 2,
                Error::Numerical { .. } => 3,
            };
            ExitCode::from(code)
        }
    }
}
