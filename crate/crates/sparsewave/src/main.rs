use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparsewave::pipeline::{self, RunManifest};
use sparsewave::{ExperimentConfig, PipelineError};

#[derive(Parser)]
#[command(name = "sparsewave", version, about = "Sparse-sensor tsunami reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON). Defaults to the built-in desk config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed, overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate every training and test epicenter.
    Simulate(Common),
    /// Train the model on the training frames.
    Train(Common),
    /// Reconstruct full fields for test (or named) epicenters.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Comma-separated epicenter ids.
        #[arg(long, value_delimiter = ',')]
        epicenters: Option<Vec<String>>,
    },
    /// Compare model and baseline waveforms at virtual points.
    Compare(Common),
    /// Write grayscale images of selected frames.
    Render(Common),
    /// Run all stages in order.
    Run(Common),
    /// Print the effective config as JSON.
    Config(Common),
}

fn setup(c: &Common) -> Result<(ExperimentConfig, PathBuf), PipelineError> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::desk(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let out = c.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("sparsewave-out"));
    Ok((cfg, out))
}

fn report(m: &RunManifest) {
    println!("{}: {} outputs, config {}", m.stage, m.outputs.len(), &m.config_hash[..12]);
    for n in &m.notes {
        println!("  {n}");
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.cmd {
        Cmd::Simulate(c) => {
            let (cfg, out) = setup(&c)?;
            report(&pipeline::cmd_simulate(&cfg, &out)?);
        }
        Cmd::Train(c) => {
            let (cfg, out) = setup(&c)?;
            report(&pipeline::cmd_train(&cfg, &out)?);
        }
        Cmd::Reconstruct { common, epicenters } => {
            let (cfg, out) = setup(&common)?;
            report(&pipeline::cmd_reconstruct(&cfg, &out, epicenters.as_deref())?);
        }
        Cmd::Compare(c) => {
            let (cfg, out) = setup(&c)?;
            report(&pipeline::cmd_compare(&cfg, &out)?);
        }
        Cmd::Render(c) => {
            let (cfg, out) = setup(&c)?;
            report(&pipeline::cmd_render(&cfg, &out)?);
        }
        Cmd::Run(c) => {
            let (cfg, out) = setup(&c)?;
            for m in pipeline::run_all(&cfg, &out)? {
                report(&m);
            }
        }
        Cmd::Config(c) => {
            let (cfg, _) = setup(&c)?;
            println!("{}", serde_json::to_string_pretty(&cfg.effective()).expect("config serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
