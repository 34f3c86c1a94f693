mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "multiplex", version, about = "Outbreak detection with mixed LFD and PCR testing")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit the viral-kinetics model to swab observations.
    Fit(Common),
    /// Evaluate testing strategies over posterior (or prior) draws.
    Simulate(Common),
    /// Evaluate strategies across a grid of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to vary.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Option<Vec<f64>>,
    },
    /// Mean cumulative incidence curves for pathogen presets.
    Curves(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Share outbreaks and test draws across strategies.
    #[arg(long, value_enum)]
    pairing: Option<OnOff>,
    /// Draw hyperparameters from the priors instead of a posterior file.
    #[arg(long)]
    prior_predictive: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            pairing: self.pairing.map(|p| matches!(p, OnOff::On)),
            prior_predictive: self.prior_predictive,
            ..Default::default()
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let (common, mut overrides) = match &cli.command {
        Cmd::Fit(c) | Cmd::Simulate(c) | Cmd::Curves(c) => (c, c.overrides()),
        Cmd::Sweep { common, axis, values } => {
            let mut o = common.overrides();
            o.sweep_axis = axis.clone();
            o.sweep_values = values.clone();
            (common, o)
        }
    };
    if let Some(n) = common.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting worker pool")?;
    }
    let mut cfg = RunConfig::load(&common.config)?;
    // --values without --axis applies to the configured axis
    if overrides.sweep_values.is_some() && overrides.sweep_axis.is_none() && cfg.sweep.is_none() {
        anyhow::bail!("--values needs a sweep axis: pass --axis or set [sweep].axis");
    }
    cfg.apply(&std::mem::take(&mut overrides));

    let written = match cli.command {
        Cmd::Fit(_) => commands::cmd_fit(&cfg)?,
        Cmd::Simulate(_) => commands::cmd_simulate(&cfg)?,
        Cmd::Sweep { .. } => commands::cmd_sweep(&cfg)?,
        Cmd::Curves(_) => commands::cmd_curves(&cfg)?,
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
