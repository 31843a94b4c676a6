//! `qcrystal`: batch runs of the path-space sampler and its verification suites.

mod commands;
mod manifest;
mod output;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use manifest::{Overrides, RunManifest, Suite};
use output::{event, VERSION};

#[derive(Parser, Debug)]
#[command(name = "qcrystal", version = VERSION, about = "Sample and verify lattice systems of quantum anharmonic oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run manifest (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory (overrides the manifest and QCRYSTAL_OUT).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Comma-separated suites.
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    suite: Option<Vec<Suite>>,

    /// Worker threads (default: available cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Continue a chain from this checkpoint file (sample only).
    #[arg(long, global = true, value_name = "PATH")]
    resume: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Run the chain and write samples, checkpoints and the chain report.
    Sample,
    /// Run the verification suites over the samples.
    Verify,
    /// Write the exact reference tables the model admits.
    Oracle,
    /// Summarize verdicts and the chain report as markdown.
    Report,
}

fn run(cli: &Cli) -> Result<bool> {
    let Some(config) = &cli.config else {
        bail!("--config PATH is required");
    };
    if cli.resume.is_some() && cli.command != Command::Sample {
        bail!("--resume only applies to `sample`");
    }
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let over = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        suites: cli.suite.clone(),
    };
    let manifest = RunManifest::load(config, &over)?;
    event("start", json!({ "command": format!("{:?}", cli.command).to_lowercase(), "version": VERSION, "seed": manifest.seed, "out": manifest.out }));
    match cli.command {
        Command::Sample => commands::cmd_sample(&manifest, cli.resume.as_deref()).map(|()| true),
        Command::Verify => commands::cmd_verify(&manifest),
        Command::Oracle => commands::cmd_oracle(&manifest).map(|_| true),
        Command::Report => commands::cmd_report(&manifest),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            event("error", json!({ "message": format!("{e:#}") }));
            ExitCode::from(2)
        }
    }
}
