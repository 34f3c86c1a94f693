use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};
use multiplex_core::inference::{fit, load_dataset, load_posterior, write_posterior_csv, CaseSummary, Diagnostics};
use multiplex_core::kinetics::PopulationHyperparams;
use multiplex_core::kpi::{evaluate, sweep, write_kpi_csv, write_kpi_json, write_sweep_csv, write_sweep_json};
use multiplex_core::outbreak::cumulative_incidence_curve;
use multiplex_core::seed;
use serde::Serialize;

use crate::config::{Command, RunConfig};

// Stream path tags, kept apart from the evaluation's [draw, replicate, ...] paths.
const FIT_STREAM: u64 = 0x4649_54;
const PRIOR_STREAM: u64 = 0x5052_494f_52;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn finish(mut w: BufWriter<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct FitReport<'a> {
    schema_version: u32,
    n_cases: usize,
    n_observations: usize,
    n_draws: usize,
    diagnostics: &'a Diagnostics,
    cases: &'a [CaseSummary],
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate(Command::Fit)?;
    let obs = cfg.inputs.observations.as_ref().expect("validated");
    let threshold = cfg.inputs.censor_threshold.expect("validated");
    let dataset = load_dataset(obs, cfg.anchor()?, threshold).with_context(|| format!("loading {}", obs.display()))?;
    info!("fitting {} cases, {} observations", dataset.n_cases(), dataset.n_observations());
    let post = fit(&dataset, &cfg.priors()?, &cfg.fit.sampler, &mut seed::stream(cfg.seed, &[FIT_STREAM]))?;
    for w in &post.diagnostics.warnings {
        warn!("{w}");
    }

    let dir = &cfg.output.dir;
    let mut w = create(dir, "posterior.csv")?;
    write_posterior_csv(&post, &mut w)?;
    finish(w)?;
    let mut w = create(dir, "fit_report.json")?;
    let report = FitReport {
        schema_version: crate::config::SCHEMA_VERSION,
        n_cases: dataset.n_cases(),
        n_observations: dataset.n_observations(),
        n_draws: post.len(),
        diagnostics: &post.diagnostics,
        cases: &post.cases,
    };
    serde_json::to_writer_pretty(&mut w, &report)?;
    finish(w)?;
    Ok(vec![dir.join("posterior.csv"), dir.join("fit_report.json")])
}

/// Posterior draws from file, or prior-predictive draws.
fn hyper_draws(cfg: &RunConfig) -> Result<Vec<PopulationHyperparams>> {
    if cfg.inputs.prior_predictive {
        let priors = cfg.priors()?;
        let mut rng = seed::stream(cfg.seed, &[PRIOR_STREAM]);
        info!("sampling {} prior-predictive hyperparameter draws", cfg.evaluation.n_posterior_draws);
        Ok((0..cfg.evaluation.n_posterior_draws).map(|_| priors.sample(&mut rng)).collect())
    } else {
        let path = cfg.inputs.posterior.as_ref().expect("validated");
        Ok(load_posterior(path)?.draws)
    }
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate(Command::Simulate)?;
    let plan = cfg.plan()?;
    let draws = hyper_draws(cfg)?;
    info!(
        "evaluating {} strategies over {} draws x {} outbreaks",
        plan.strategies.len(),
        plan.n_posterior_draws,
        plan.n_replicates
    );
    let table = evaluate(&plan, &draws, &cfg.lfd, &cfg.pcr)?;
    for s in &table.strategies {
        if s.truncated_runs > 0 {
            warn!("{}: {} outbreak runs hit a simulation limit", s.strategy, s.truncated_runs);
        }
    }
    let dir = &cfg.output.dir;
    let mut w = create(dir, "kpi.csv")?;
    write_kpi_csv(&table, &mut w)?;
    finish(w)?;
    let mut w = create(dir, "kpi.json")?;
    write_kpi_json(&table, &mut w)?;
    finish(w)?;
    Ok(vec![dir.join("kpi.csv"), dir.join("kpi.json")])
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate(Command::Sweep)?;
    let plan = cfg.plan()?;
    let grid = cfg.sweep_grid()?;
    let draws = hyper_draws(cfg)?;
    info!("sweeping {} over {:?}", grid.axis.name(), grid.values);
    let result = sweep(&plan, &grid, &draws, &cfg.lfd, &cfg.pcr)?;

    let dir = &cfg.output.dir;
    let axis = grid.axis.name();
    let mut written = Vec::new();
    for (i, cell) in result.cells.iter().enumerate() {
        let name = format!("sweep_{axis}_cell{i}.csv");
        let mut w = create(dir, &name)?;
        write_kpi_csv(&cell.table, &mut w)?;
        finish(w)?;
        written.push(dir.join(name));
    }
    let name = format!("sweep_{axis}.csv");
    let mut w = create(dir, &name)?;
    write_sweep_csv(&result, &mut w)?;
    finish(w)?;
    written.push(dir.join(name));
    let name = format!("sweep_{axis}.json");
    let mut w = create(dir, &name)?;
    write_sweep_json(&result, &mut w)?;
    finish(w)?;
    written.push(dir.join(name));
    Ok(written)
}

/// Trajectories do not influence infection times, so curves use a fixed
/// nominal trajectory population.
const NOMINAL_HYPER: PopulationHyperparams = PopulationHyperparams {
    mu_p: 2.197_224_577_336_219_6,
    sigma_p: 0.2,
    alpha_i2p: 5.0,
    beta_i2p: 1.25,
    alpha_p2c: 6.0,
    beta_p2c: 1.0,
    sigma_obs: 0.5,
};

pub const CURVE_COLUMNS: [&str; 6] =
    ["schema_version", "pathogen", "time", "mean_cumulative_infections", "n_included", "conditioned_on_survival"];

pub fn cmd_curves(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate(Command::Curves)?;
    let opts = cfg.curve_options()?;
    let dir = &cfg.output.dir;
    let w = create(dir, "curves.csv")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(CURVE_COLUMNS)?;
    for (name, profile) in cfg.curve_pathogens()? {
        // same master seed for every pathogen: paired simulations
        let curve = cumulative_incidence_curve(&profile, &NOMINAL_HYPER, &opts, cfg.seed)?;
        for (t, m) in curve.times.iter().zip(&curve.mean_cumulative) {
            csv.write_record([
                crate::config::SCHEMA_VERSION.to_string(),
                name.clone(),
                t.to_string(),
                m.to_string(),
                curve.n_included.to_string(),
                curve.conditioned_on_survival.to_string(),
            ])?;
        }
    }
    let w = csv.into_inner().map_err(|e| anyhow::anyhow!("writing curves: {}", e.error()))?;
    finish(w)?;
    Ok(vec![dir.join("curves.csv")])
}
