//! Metropolis-within-Gibbs fitting of the hierarchical trajectory model.
//!
//! Blocks, in sweep order:
//!
//! 1. one block per case: log peak, log rise, log decay, and for
//!    onset-anchored data the log incubation period;
//! 2. (mu_p, log sigma_p);
//! 3. (log alpha_i2p, log beta_i2p);
//! 4. (log alpha_p2c, log beta_p2c);
//! 5. log sigma_obs.
//!
//! Positive quantities move on the log scale, so each block target carries
//! the log-Jacobian `Σ log x`. Blocks adapt during burn-in only.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::dist::DelayDistribution;
use crate::kinetics::{PopulationHyperparams, TrajectoryParams};
use crate::seed;

use super::data::{CaseSeries, Dataset, Measurement};
use super::model::{case_log_likelihood, population_ln_density, posterior_terms};
use super::priors::PriorSet;
use super::sampler::{effective_sample_size, split_rhat, AdaptiveBlock};

pub const MIN_RETAINED: usize = 1000;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error("non-finite log posterior at initialisation: {component}")]
    Initialization { component: &'static str },
    #[error(transparent)]
    Param(#[from] crate::ParamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub n_chains: usize,
    pub n_iterations: usize,
    pub burn_in_fraction: f64,
    /// Pooled retained draws across all chains.
    pub n_retained: usize,
    /// Acceptance target for multi-dimensional blocks; 1-d blocks target 0.44.
    pub target_acceptance: f64,
    pub acceptance_band: (f64, f64),
    pub ess_floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_iterations: 100_000,
            burn_in_fraction: 0.5,
            n_retained: 1000,
            target_acceptance: 0.3,
            acceptance_band: (0.2, 0.5),
            ess_floor: 100.0,
        }
    }
}

impl FitConfig {
    fn burn_in(&self) -> usize {
        (self.n_iterations as f64 * self.burn_in_fraction).floor() as usize
    }

    fn retained_per_chain(&self) -> Vec<usize> {
        let base = self.n_retained / self.n_chains;
        let extra = self.n_retained % self.n_chains;
        (0..self.n_chains).map(|c| base + usize::from(c < extra)).collect()
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let err = |m: String| Err(FitError::Config(m));
        if self.n_chains == 0 {
            return err("n_chains must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return err(format!("burn_in_fraction {} not in [0, 1)", self.burn_in_fraction));
        }
        if self.n_retained < MIN_RETAINED {
            return err(format!("n_retained {} is below {MIN_RETAINED}", self.n_retained));
        }
        let post = self.n_iterations - self.burn_in();
        let need = self.retained_per_chain()[0];
        if post < need {
            return err(format!(
                "{post} post-burn-in iterations per chain cannot supply {need} retained draws"
            ));
        }
        if !(0.0 < self.target_acceptance && self.target_acceptance < 1.0) {
            return err(format!("target_acceptance {} not in (0, 1)", self.target_acceptance));
        }
        let (lo, hi) = self.acceptance_band;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return err(format!("acceptance_band ({lo}, {hi}) is not an interval in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAcceptance {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Diagnostics {
    /// Post-burn-in acceptance rate per block kind, pooled across chains.
    pub acceptance: BTreeMap<String, BlockAcceptance>,
    pub ess: BTreeMap<String, f64>,
    pub rhat: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

/// Posterior means of one case's latent quantities over the retained iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case_id: String,
    pub trajectory: TrajectoryParams,
    pub incubation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub draws: Vec<PopulationHyperparams>,
    /// Chain index of each draw.
    pub chain: Vec<usize>,
    pub diagnostics: Diagnostics,
    /// Empty when draws were read back from a file.
    #[serde(default)]
    pub cases: Vec<CaseSummary>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.to_array()[index]).collect()
    }
}

/// Sufficient statistics of the case trajectories for the hyper blocks.
#[derive(Debug, Default, Clone, Copy)]
struct CaseStats {
    n: f64,
    sum_ln_peak: f64,
    sum_ln_peak_sq: f64,
    sum_ln_rise: f64,
    sum_rise: f64,
    sum_ln_decay: f64,
    sum_decay: f64,
}

fn gamma_sum_ln_pdf(n: f64, sum_ln: f64, sum: f64, shape: f64, rate: f64) -> f64 {
    n * (shape * rate.ln() - ln_gamma(shape)) + (shape - 1.0) * sum_ln - rate * sum
}

struct Chain<'a> {
    data: &'a Dataset,
    priors: &'a PriorSet,
    incubation: Option<DelayDistribution>,
    /// Log-scale case coordinates; the fourth entry is used only with latent incubation.
    cases: Vec<[f64; 4]>,
    hyper: PopulationHyperparams,
    case_blocks: Vec<AdaptiveBlock>,
    peak_block: AdaptiveBlock,
    rise_block: AdaptiveBlock,
    decay_block: AdaptiveBlock,
    noise_block: AdaptiveBlock,
}

fn traj_of(x: &[f64]) -> TrajectoryParams {
    TrajectoryParams {
        peak: x[0].exp(),
        rise_days: x[1].exp(),
        decay_days: x[2].exp(),
    }
}

impl<'a> Chain<'a> {
    fn case_dim(&self) -> usize {
        if self.incubation.is_some() {
            4
        } else {
            3
        }
    }

    fn case_log_target(&self, case: &CaseSeries, x: &[f64]) -> f64 {
        let traj = traj_of(x);
        let (incubation, inc_term) = match self.incubation {
            Some(prior) => {
                let inc = x[3].exp();
                (inc, prior.ln_pdf(inc))
            }
            None => (0.0, 0.0),
        };
        let (det, cens) = case_log_likelihood(
            case,
            &traj,
            incubation,
            self.hyper.sigma_obs,
            self.data.censor_threshold,
        );
        let jacobian: f64 = x.iter().sum();
        det + cens + population_ln_density(&traj, &self.hyper) + inc_term + jacobian
    }

    fn stats(&self) -> CaseStats {
        let mut s = CaseStats::default();
        for x in &self.cases {
            s.n += 1.0;
            s.sum_ln_peak += x[0];
            s.sum_ln_peak_sq += x[0] * x[0];
            s.sum_ln_rise += x[1];
            s.sum_rise += x[1].exp();
            s.sum_ln_decay += x[2];
            s.sum_decay += x[2].exp();
        }
        s
    }

    fn noise_log_target(&self, ln_sigma: f64) -> f64 {
        let sigma = ln_sigma.exp();
        let mut total = 0.0;
        for (case, x) in self.data.cases.iter().zip(&self.cases) {
            let inc = if self.incubation.is_some() { x[3].exp() } else { 0.0 };
            let (det, cens) =
                case_log_likelihood(case, &traj_of(x), inc, sigma, self.data.censor_threshold);
            total += det + cens;
        }
        total + self.priors.sigma_obs.ln_pdf(sigma) + ln_sigma
    }

    fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let d = self.case_dim();
        for i in 0..self.cases.len() {
            let case = &self.data.cases[i];
            let mut x = self.cases[i];
            let mut block = std::mem::replace(&mut self.case_blocks[i], AdaptiveBlock::new(&[1.0], 0.5));
            let mut lp = self.case_log_target(case, &x[..d]);
            block.step(&mut x[..d], &mut lp, |y| self.case_log_target(case, y), rng);
            self.case_blocks[i] = block;
            self.cases[i] = x;
        }

        let s = self.stats();
        let priors = *self.priors;

        let peak_target = |y: &[f64]| {
            let (mu, ln_s) = (y[0], y[1]);
            let sd = ln_s.exp();
            let ss = s.sum_ln_peak_sq - 2.0 * mu * s.sum_ln_peak + s.n * mu * mu;
            -0.5 * ss / (sd * sd) - s.n * (ln_s + LN_SQRT_2PI) - s.sum_ln_peak
                + priors.mu_p.ln_pdf(mu)
                + priors.sigma_p.ln_pdf(sd)
                + ln_s
        };
        let mut y = [self.hyper.mu_p, self.hyper.sigma_p.ln()];
        let mut lp = peak_target(&y);
        self.peak_block.step(&mut y, &mut lp, peak_target, rng);
        self.hyper.mu_p = y[0];
        self.hyper.sigma_p = y[1].exp();

        let rise_target = |y: &[f64]| {
            let (a, b) = (y[0].exp(), y[1].exp());
            gamma_sum_ln_pdf(s.n, s.sum_ln_rise, s.sum_rise, a, b)
                + priors.alpha_i2p.ln_pdf(a)
                + priors.beta_i2p.ln_pdf(b)
                + y[0]
                + y[1]
        };
        let mut y = [self.hyper.alpha_i2p.ln(), self.hyper.beta_i2p.ln()];
        let mut lp = rise_target(&y);
        self.rise_block.step(&mut y, &mut lp, rise_target, rng);
        self.hyper.alpha_i2p = y[0].exp();
        self.hyper.beta_i2p = y[1].exp();

        let decay_target = |y: &[f64]| {
            let (a, b) = (y[0].exp(), y[1].exp());
            gamma_sum_ln_pdf(s.n, s.sum_ln_decay, s.sum_decay, a, b)
                + priors.alpha_p2c.ln_pdf(a)
                + priors.beta_p2c.ln_pdf(b)
                + y[0]
                + y[1]
        };
        let mut y = [self.hyper.alpha_p2c.ln(), self.hyper.beta_p2c.ln()];
        let mut lp = decay_target(&y);
        self.decay_block.step(&mut y, &mut lp, decay_target, rng);
        self.hyper.alpha_p2c = y[0].exp();
        self.hyper.beta_p2c = y[1].exp();

        let mut y = [self.hyper.sigma_obs.ln()];
        let mut lp = self.noise_log_target(y[0]);
        let mut block = std::mem::replace(&mut self.noise_block, AdaptiveBlock::new(&[1.0], 0.5));
        block.step(&mut y, &mut lp, |v| self.noise_log_target(v[0]), rng);
        self.noise_block = block;
        self.hyper.sigma_obs = y[0].exp();
    }

    fn freeze(&mut self) {
        self.case_blocks.iter_mut().for_each(AdaptiveBlock::freeze);
        for b in [
            &mut self.peak_block,
            &mut self.rise_block,
            &mut self.decay_block,
            &mut self.noise_block,
        ] {
            b.freeze();
        }
    }
}

/// Starting state built from the data: per-case peak at the largest detected
/// value, hyperparameters by moment matching.
pub fn initial_state(dataset: &Dataset) -> (Vec<TrajectoryParams>, Vec<f64>, PopulationHyperparams) {
    let incubation = dataset.incubation_prior();
    let inc0 = incubation.map_or(0.0, |d| d.mean());
    let mut trajs = Vec::with_capacity(dataset.n_cases());
    for case in &dataset.cases {
        let detected: Vec<(f64, f64)> = case
            .iter()
            .filter_map(|(t, m)| match m {
                Measurement::Detected(v) => Some((t + inc0, v)),
                Measurement::Censored => None,
            })
            .collect();
        let traj = match detected.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1)) {
            Some((t_max, v_max)) => {
                let last = detected.iter().map(|(t, _)| *t).fold(t_max, f64::max);
                TrajectoryParams {
                    peak: v_max.max(dataset.censor_threshold + 1.0).max(1.0),
                    rise_days: t_max.max(0.5),
                    decay_days: (last - t_max + 1.0).max(1.0),
                }
            }
            None => TrajectoryParams {
                peak: (dataset.censor_threshold + 1.0).max(1.0),
                rise_days: 2.0,
                decay_days: 4.0,
            },
        };
        trajs.push(traj);
    }

    let n = trajs.len() as f64;
    let mean_var = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        (m, var)
    };
    let (mu_p, var_lp) = mean_var(&mut trajs.iter().map(|t| t.peak.ln()));
    let gamma_mm = |(m, var): (f64, f64)| {
        // floor the coefficient of variation at 0.25 for near-identical cases
        let var = var.max((0.25 * m).powi(2));
        (m * m / var, m / var)
    };
    let (alpha_i2p, beta_i2p) = gamma_mm(mean_var(&mut trajs.iter().map(|t| t.rise_days)));
    let (alpha_p2c, beta_p2c) = gamma_mm(mean_var(&mut trajs.iter().map(|t| t.decay_days)));
    let hyper = PopulationHyperparams {
        mu_p,
        sigma_p: var_lp.sqrt().max(0.1),
        alpha_i2p,
        beta_i2p,
        alpha_p2c,
        beta_p2c,
        sigma_obs: 0.5,
    };
    let incubations = vec![inc0; if incubation.is_some() { trajs.len() } else { 0 }];
    (trajs, incubations, hyper)
}

struct ChainOutput {
    draws: Vec<PopulationHyperparams>,
    /// Per-case sums of (peak, rise, decay, incubation) over retained iterations.
    case_sums: Vec<[f64; 4]>,
    acceptance: Vec<(String, f64)>,
}

fn run_chain(
    dataset: &Dataset,
    priors: &PriorSet,
    config: &FitConfig,
    retain: usize,
    seed: u64,
) -> ChainOutput {
    let mut rng = seed::stream(seed, &[]);
    let (trajs, incs, hyper) = initial_state(dataset);
    let incubation = dataset.incubation_prior();
    let dim = if incubation.is_some() { 4 } else { 3 };
    let cases: Vec<[f64; 4]> = trajs
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let inc = incs.get(i).copied().unwrap_or(1.0);
            [t.peak.ln(), t.rise_days.ln(), t.decay_days.ln(), inc.ln()]
        })
        .collect();
    let multi = config.target_acceptance;
    let mut chain = Chain {
        data: dataset,
        priors,
        incubation,
        case_blocks: (0..cases.len()).map(|_| AdaptiveBlock::new(&vec![0.1; dim], multi)).collect(),
        cases,
        hyper,
        peak_block: AdaptiveBlock::new(&[0.05, 0.1], multi),
        rise_block: AdaptiveBlock::new(&[0.1, 0.1], multi),
        decay_block: AdaptiveBlock::new(&[0.1, 0.1], multi),
        noise_block: AdaptiveBlock::new(&[0.05], 0.44),
    };

    let burn = config.burn_in();
    let post = config.n_iterations - burn;
    // indices into the post-burn-in stretch, evenly spaced and ending at the last one
    let keep: Vec<usize> = (1..=retain).map(|j| j * post / retain - 1).collect();
    let mut next = keep.iter().peekable();
    let mut draws = Vec::with_capacity(retain);
    let mut case_sums = vec![[0.0; 4]; dataset.n_cases()];

    for it in 0..config.n_iterations {
        if it == burn {
            chain.freeze();
        }
        chain.sweep(&mut rng);
        if it >= burn {
            if let Some(&&k) = next.peek() {
                if it - burn == k {
                    draws.push(chain.hyper);
                    for (sum, x) in case_sums.iter_mut().zip(&chain.cases) {
                        for (acc, v) in sum.iter_mut().zip(x) {
                            *acc += v.exp();
                        }
                    }
                    next.next();
                }
            }
        }
    }

    let rates: Vec<f64> = chain.case_blocks.iter().map(AdaptiveBlock::acceptance_rate).collect();
    let mut acceptance = vec![];
    acceptance.extend(rates.iter().map(|r| ("case".to_string(), *r)));
    acceptance.push(("peak_hyper".into(), chain.peak_block.acceptance_rate()));
    acceptance.push(("rise_hyper".into(), chain.rise_block.acceptance_rate()));
    acceptance.push(("decay_hyper".into(), chain.decay_block.acceptance_rate()));
    acceptance.push(("sigma_obs".into(), chain.noise_block.acceptance_rate()));
    ChainOutput { draws, case_sums, acceptance }
}

/// Fit the model and return `config.n_retained` pooled posterior draws.
///
/// Chain seeds are drawn from `rng`; chains run in parallel and are merged in
/// chain order, so the output depends only on the stream state.
pub fn fit<R: Rng + ?Sized>(
    dataset: &Dataset,
    priors: &PriorSet,
    config: &FitConfig,
    rng: &mut R,
) -> Result<PosteriorDraws, FitError> {
    config.validate()?;
    priors.validate()?;
    if dataset.n_cases() == 0 {
        return Err(FitError::Config("dataset has no cases".into()));
    }
    let (trajs, incs, hyper) = initial_state(dataset);
    let terms = posterior_terms(dataset, &trajs, &incs, &hyper, priors);
    if let Some(component) = terms.first_nonfinite() {
        return Err(FitError::Initialization { component });
    }

    let master: u64 = rng.random();
    let per_chain = config.retained_per_chain();
    let outputs: Vec<ChainOutput> = per_chain
        .par_iter()
        .enumerate()
        .map(|(c, &retain)| run_chain(dataset, priors, config, retain, seed::derive_seed(master, &[c as u64])))
        .collect();

    let mut draws = Vec::with_capacity(config.n_retained);
    let mut chain_of = Vec::with_capacity(config.n_retained);
    for (c, out) in outputs.iter().enumerate() {
        draws.extend_from_slice(&out.draws);
        chain_of.extend(std::iter::repeat_n(c, out.draws.len()));
    }
    let diagnostics = diagnose(&outputs, config);
    let total = draws.len() as f64;
    let cases = dataset
        .cases
        .iter()
        .enumerate()
        .map(|(i, case)| {
            let mut m = [0.0; 4];
            for out in &outputs {
                for (acc, v) in m.iter_mut().zip(&out.case_sums[i]) {
                    *acc += v / total;
                }
            }
            CaseSummary {
                case_id: case.id.clone(),
                trajectory: TrajectoryParams { peak: m[0], rise_days: m[1], decay_days: m[2] },
                incubation: dataset.incubation_prior().map(|_| m[3]),
            }
        })
        .collect();
    Ok(PosteriorDraws {
        draws,
        chain: chain_of,
        diagnostics,
        cases,
    })
}

fn diagnose(outputs: &[ChainOutput], config: &FitConfig) -> Diagnostics {
    let mut diag = Diagnostics::default();
    let mut by_kind: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for out in outputs {
        for (k, r) in &out.acceptance {
            by_kind.entry(k.clone()).or_default().push(*r);
        }
    }
    let (lo, hi) = config.acceptance_band;
    for (kind, rates) in by_kind {
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
        let max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo..=hi).contains(&mean) {
            diag.warnings.push(format!(
                "mean acceptance rate of {kind} blocks {mean:.3} outside [{lo}, {hi}]"
            ));
        }
        diag.acceptance.insert(kind, BlockAcceptance { mean, min, max });
    }
    for (p, name) in PopulationHyperparams::NAMES.iter().enumerate() {
        let columns: Vec<Vec<f64>> = outputs
            .iter()
            .map(|o| o.draws.iter().map(|d| d.to_array()[p]).collect())
            .collect();
        let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
        let ess = effective_sample_size(&refs);
        let rhat = split_rhat(&refs);
        if ess < config.ess_floor {
            diag.warnings.push(format!("effective sample size of {name} is {ess:.0} (< {})", config.ess_floor));
        }
        if rhat > 1.05 {
            diag.warnings.push(format!("split R-hat of {name} is {rhat:.3} (> 1.05)"));
        }
        diag.ess.insert((*name).to_string(), ess);
        diag.rhat.insert((*name).to_string(), rhat);
    }
    diag
}

/// Columns of the posterior CSV, in order.
pub fn posterior_columns() -> Vec<&'static str> {
    let mut cols = vec!["draw", "chain"];
    cols.extend(PopulationHyperparams::NAMES);
    cols
}

pub fn write_posterior_csv<W: Write>(posterior: &PosteriorDraws, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(posterior_columns())?;
    for (i, (d, c)) in posterior.draws.iter().zip(&posterior.chain).enumerate() {
        let mut row = vec![i.to_string(), c.to_string()];
        row.extend(d.to_array().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum PosteriorReadError {
    #[error("cannot read posterior {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("posterior header must be `{expected}`")]
    Header { expected: String },
    #[error("posterior row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("posterior file has no draws")]
    Empty,
}

/// Read draws written by [`write_posterior_csv`]. Diagnostics are not restored.
pub fn read_posterior_csv<R: Read>(reader: R) -> Result<PosteriorDraws, PosteriorReadError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let expected = posterior_columns();
    let header = rdr.headers().map_err(|e| PosteriorReadError::Row { row: 0, message: e.to_string() })?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(PosteriorReadError::Header { expected: expected.join(",") });
    }
    let mut draws = Vec::new();
    let mut chain = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| PosteriorReadError::Row { row, message: e.to_string() })?;
        let bad = |m: String| PosteriorReadError::Row { row, message: m };
        chain.push(rec[1].parse::<usize>().map_err(|e| bad(format!("chain: {e}")))?);
        let mut v = [0.0; 7];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = rec[k + 2]
                .parse()
                .map_err(|e| bad(format!("{}: {e}", PopulationHyperparams::NAMES[k])))?;
        }
        let hyper = PopulationHyperparams::from_array(v);
        hyper.validate().map_err(|e| bad(e.to_string()))?;
        draws.push(hyper);
    }
    if draws.is_empty() {
        return Err(PosteriorReadError::Empty);
    }
    Ok(PosteriorDraws {
        draws,
        chain,
        diagnostics: Diagnostics::default(),
        cases: Vec::new(),
    })
}

pub fn load_posterior(path: impl AsRef<Path>) -> Result<PosteriorDraws, PosteriorReadError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| PosteriorReadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_posterior_csv(file)
}

/// Posterior-mean trajectory residual check used in tests and reports:
/// root-mean-square distance between detected values and `f` evaluated at
/// the given case parameters.
pub fn detected_rmse(case: &CaseSeries, traj: &TrajectoryParams, incubation: f64) -> f64 {
    let (mut ss, mut n) = (0.0, 0usize);
    for (t, m) in case.iter() {
        if let Measurement::Detected(y) = m {
            ss += (y - traj.concentration(incubation + t)).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        (ss / n as f64).sqrt()
    }
}
