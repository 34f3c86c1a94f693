//! Monte Carlo evaluation of testing strategies over posterior draws, and
//! one-parameter sensitivity sweeps.
//!
//! For every retained hyperparameter draw, `n_replicates` outbreaks are
//! simulated and each strategy is run on them. Draw-level statistics are then
//! summarised across draws by their mean and an equal-tailed quantile
//! interval.
//!
//! Conditioning: time, infection and test-count averages use detected
//! outbreaks only; confirmation averages use confirmed outbreaks only. A
//! draw with an empty denominator contributes nothing to that metric, and a
//! metric with no contributing draws is reported as undefined.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::PopulationHyperparams;
use crate::outbreak::{simulate_tree, PathogenProfile, SimLimits};
use crate::seed;
use crate::strategies::{run_paired, run_strategy, OutbreakView, StrategyKind, StrategyOutcome, TestDraws};
use crate::testmodels::{LfdModel, PcrModel};
use crate::ParamError;

/// Version of the CSV/JSON output layout.
pub const SCHEMA_VERSION: u32 = 1;

pub const KPI_COLUMNS: [&str; 9] = [
    "schema_version",
    "axis",
    "axis_value",
    "strategy",
    "metric",
    "mean",
    "lower",
    "upper",
    "n_draws",
];

#[derive(Debug, Error)]
pub enum KpiError {
    #[error("invalid evaluation plan: {0}")]
    Plan(String),
    #[error("{requested} posterior draws requested but only {available} available")]
    NotEnoughDraws { requested: usize, available: usize },
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationPlan {
    pub pathogen: PathogenProfile,
    pub strategies: Vec<StrategyKind>,
    pub n_posterior_draws: usize,
    pub n_replicates: usize,
    pub master_seed: u64,
    /// Common random numbers across strategies.
    pub pairing: bool,
    /// Coverage of the reported quantile interval.
    pub interval_width: f64,
    pub limits: SimLimits,
}

impl Default for EvaluationPlan {
    fn default() -> Self {
        Self {
            pathogen: PathogenProfile::sars2(),
            strategies: StrategyKind::ALL.to_vec(),
            n_posterior_draws: 1000,
            n_replicates: 250,
            master_seed: 0,
            pairing: true,
            interval_width: 0.95,
            limits: SimLimits::default(),
        }
    }
}

impl EvaluationPlan {
    pub fn validate(&self) -> Result<(), KpiError> {
        self.pathogen.validate()?;
        self.limits.validate()?;
        if self.strategies.is_empty() {
            return Err(KpiError::Plan("no strategies selected".into()));
        }
        if self.n_posterior_draws == 0 || self.n_replicates == 0 {
            return Err(KpiError::Plan("n_posterior_draws and n_replicates must be >= 1".into()));
        }
        if !(self.interval_width > 0.0 && self.interval_width < 1.0) {
            return Err(KpiError::Plan(format!("interval_width {} not in (0, 1)", self.interval_width)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DetectionProbability,
    UndetectedGivenFiveSymptomatic,
    TimeFirstPositive,
    InfectionsAtFirstPositive,
    LfdTests,
    PcrTests,
    TimeConfirmation,
    InfectionsAtConfirmation,
    PcrTestsAwaitingConfirmation,
    AllAsymptomaticFraction,
}

impl Metric {
    pub const ALL: [Metric; 10] = [
        Self::DetectionProbability,
        Self::UndetectedGivenFiveSymptomatic,
        Self::TimeFirstPositive,
        Self::InfectionsAtFirstPositive,
        Self::LfdTests,
        Self::PcrTests,
        Self::TimeConfirmation,
        Self::InfectionsAtConfirmation,
        Self::PcrTestsAwaitingConfirmation,
        Self::AllAsymptomaticFraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::DetectionProbability => "detection_probability",
            Self::UndetectedGivenFiveSymptomatic => "undetected_given_five_symptomatic",
            Self::TimeFirstPositive => "time_first_positive",
            Self::InfectionsAtFirstPositive => "infections_at_first_positive",
            Self::LfdTests => "lfd_tests",
            Self::PcrTests => "pcr_tests",
            Self::TimeConfirmation => "time_confirmation",
            Self::InfectionsAtConfirmation => "infections_at_confirmation",
            Self::PcrTestsAwaitingConfirmation => "pcr_tests_awaiting_confirmation",
            Self::AllAsymptomaticFraction => "all_asymptomatic_fraction",
        }
    }

    /// Outbreaks over which the draw-level statistic is averaged.
    pub fn conditioning(self) -> &'static str {
        match self {
            Self::DetectionProbability | Self::AllAsymptomaticFraction => "all outbreaks",
            Self::UndetectedGivenFiveSymptomatic => "outbreaks with five symptomatic cases",
            Self::TimeFirstPositive | Self::InfectionsAtFirstPositive | Self::LfdTests | Self::PcrTests => {
                "detected outbreaks"
            }
            Self::TimeConfirmation | Self::InfectionsAtConfirmation | Self::PcrTestsAwaitingConfirmation => {
                "confirmed outbreaks"
            }
        }
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|&m| m == self).expect("listed")
    }
}

const N_METRICS: usize = Metric::ALL.len();

/// Across-draw summary of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    /// Draws with a defined draw-level value.
    pub n_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub metric: Metric,
    pub conditioning: String,
    /// `None` when no draw had a defined value.
    pub summary: Option<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyKpis {
    pub strategy: StrategyKind,
    pub metrics: Vec<MetricEntry>,
    /// Outbreak runs that hit a simulation limit before resolving.
    pub truncated_runs: usize,
    /// Draw-level values, indexed `[draw][metric]` in [`Metric::ALL`] order.
    #[serde(skip)]
    pub draw_values: Vec<[Option<f64>; N_METRICS]>,
}

impl StrategyKpis {
    pub fn summary(&self, metric: Metric) -> Option<MetricSummary> {
        self.metrics[metric.index()].summary
    }

    pub fn draw_level(&self, metric: Metric) -> Vec<Option<f64>> {
        self.draw_values.iter().map(|v| v[metric.index()]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiTable {
    pub schema_version: u32,
    pub n_draws: usize,
    pub n_replicates: usize,
    pub pairing: bool,
    pub interval_width: f64,
    pub strategies: Vec<StrategyKpis>,
}

impl KpiTable {
    pub fn strategy(&self, kind: StrategyKind) -> Option<&StrategyKpis> {
        self.strategies.iter().find(|s| s.strategy == kind)
    }

    pub fn summary(&self, kind: StrategyKind, metric: Metric) -> Option<MetricSummary> {
        self.strategy(kind).and_then(|s| s.summary(metric))
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    n: usize,
    detected: usize,
    five: usize,
    five_undetected: usize,
    all_asym: usize,
    sum_t: f64,
    sum_inf: f64,
    sum_lfd: f64,
    sum_pcr: f64,
    confirmed: usize,
    sum_tc: f64,
    sum_inf_c: f64,
    sum_await: f64,
    truncated: usize,
}

impl Tally {
    fn add(&mut self, o: &StrategyOutcome) {
        self.n += 1;
        self.all_asym += usize::from(o.all_asymptomatic);
        self.truncated += usize::from(o.truncated);
        if o.had_five_symptomatic {
            self.five += 1;
            self.five_undetected += usize::from(!o.detected);
        }
        if let Some(t) = o.t_first_positive {
            self.detected += 1;
            self.sum_t += t;
            self.sum_inf += o.infections_at_first_positive as f64;
            self.sum_lfd += o.n_lfd as f64;
            self.sum_pcr += o.n_pcr as f64;
        }
        if let Some(c) = o.confirmation {
            self.confirmed += 1;
            self.sum_tc += c.time;
            self.sum_inf_c += c.infections as f64;
            self.sum_await += c.pcr_awaiting as f64;
        }
    }

    fn values(&self, kind: StrategyKind) -> [Option<f64>; N_METRICS] {
        let ratio = |num: f64, den: usize| (den > 0).then(|| num / den as f64);
        let confirm = |num: f64| {
            if kind == StrategyKind::LfdConfirmPcr {
                ratio(num, self.confirmed)
            } else {
                None
            }
        };
        [
            ratio(self.detected as f64, self.n),
            ratio(self.five_undetected as f64, self.five),
            ratio(self.sum_t, self.detected),
            ratio(self.sum_inf, self.detected),
            ratio(self.sum_lfd, self.detected),
            ratio(self.sum_pcr, self.detected),
            confirm(self.sum_tc),
            confirm(self.sum_inf_c),
            confirm(self.sum_await),
            ratio(self.all_asym as f64, self.n),
        ]
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarise(values: impl Iterator<Item = Option<f64>>, width: f64) -> Option<MetricSummary> {
    let mut v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let tail = (1.0 - width) / 2.0;
    Some(MetricSummary {
        mean: v.iter().sum::<f64>() / v.len() as f64,
        lower: quantile(&v, tail),
        upper: quantile(&v, 1.0 - tail),
        n_draws: v.len(),
    })
}

/// Evenly spaced subset of `n` out of `available` draws.
fn select_draws(available: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| i * available / n).collect()
}

const TREE_STREAM: u64 = 0;
const TEST_STREAM: u64 = 1;

fn run_replicate(
    plan: &EvaluationPlan,
    hyper: &PopulationHyperparams,
    draw: u64,
    rep: u64,
    lfd: &LfdModel,
    pcr: &PcrModel,
) -> Result<Vec<StrategyOutcome>, ParamError> {
    let master = plan.master_seed;
    if plan.pairing {
        let tree = seed::stream(master, &[draw, rep, TREE_STREAM]);
        let draws = TestDraws::sample(&mut seed::stream(master, &[draw, rep, TEST_STREAM]));
        let mut view = OutbreakView::new(simulate_tree(&plan.pathogen, hyper, plan.limits, tree)?);
        Ok(run_paired(&mut view, &plan.strategies, lfd, pcr, &draws))
    } else {
        plan.strategies
            .iter()
            .enumerate()
            .map(|(s, &kind)| {
                let block = s as u64 + 1;
                let tree = seed::stream(master, &[draw, rep, TREE_STREAM, block]);
                let draws = TestDraws::sample(&mut seed::stream(master, &[draw, rep, TEST_STREAM, block]));
                let mut view = OutbreakView::new(simulate_tree(&plan.pathogen, hyper, plan.limits, tree)?);
                Ok(run_strategy(&mut view, kind, lfd, pcr, &draws))
            })
            .collect()
    }
}

/// Evaluate every strategy of `plan` over `posterior`.
///
/// `plan.n_posterior_draws` evenly spaced draws are used; it is an error to
/// ask for more than `posterior` holds. The result does not depend on the
/// number of worker threads.
pub fn evaluate(
    plan: &EvaluationPlan,
    posterior: &[PopulationHyperparams],
    lfd: &LfdModel,
    pcr: &PcrModel,
) -> Result<KpiTable, KpiError> {
    plan.validate()?;
    lfd.validate()?;
    pcr.validate()?;
    if posterior.len() < plan.n_posterior_draws {
        return Err(KpiError::NotEnoughDraws {
            requested: plan.n_posterior_draws,
            available: posterior.len(),
        });
    }
    let chosen = select_draws(posterior.len(), plan.n_posterior_draws);
    for &i in &chosen {
        posterior[i].validate()?;
    }

    let per_draw: Vec<Vec<Tally>> = chosen
        .par_iter()
        .enumerate()
        .map(|(k, &i)| {
            let mut tallies = vec![Tally::default(); plan.strategies.len()];
            for rep in 0..plan.n_replicates as u64 {
                let outcomes = run_replicate(plan, &posterior[i], k as u64, rep, lfd, pcr)?;
                for (t, o) in tallies.iter_mut().zip(&outcomes) {
                    t.add(o);
                }
            }
            Ok(tallies)
        })
        .collect::<Result<_, ParamError>>()?;

    let strategies = plan
        .strategies
        .iter()
        .enumerate()
        .map(|(s, &kind)| {
            let draw_values: Vec<[Option<f64>; N_METRICS]> =
                per_draw.iter().map(|t| t[s].values(kind)).collect();
            let metrics = Metric::ALL
                .iter()
                .map(|&m| MetricEntry {
                    metric: m,
                    conditioning: m.conditioning().to_string(),
                    summary: summarise(draw_values.iter().map(|v| v[m.index()]), plan.interval_width),
                })
                .collect();
            StrategyKpis {
                strategy: kind,
                metrics,
                truncated_runs: per_draw.iter().map(|t| t[s].truncated).sum(),
                draw_values,
            }
        })
        .collect();

    Ok(KpiTable {
        schema_version: SCHEMA_VERSION,
        n_draws: plan.n_posterior_draws,
        n_replicates: plan.n_replicates,
        pairing: plan.pairing,
        interval_width: plan.interval_width,
        strategies,
    })
}

/// Parameters varied one at a time in a sensitivity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// log₁₀ copies·ml⁻¹.
    PcrLod,
    PcrSensitivity,
    R0,
    PAsymptomatic,
    /// log₁₀ shift of the LFD curve.
    LfdShift,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [Self::PcrLod, Self::PcrSensitivity, Self::R0, Self::PAsymptomatic, Self::LfdShift];

    pub fn name(self) -> &'static str {
        match self {
            Self::PcrLod => "pcr_lod",
            Self::PcrSensitivity => "pcr_sensitivity",
            Self::R0 => "r0",
            Self::PAsymptomatic => "p_asymptomatic",
            Self::LfdShift => "lfd_shift",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            Self::PcrLod => vec![100f64.log10(), 500f64.log10(), 1000f64.log10()],
            Self::PcrSensitivity => vec![0.90, 0.95, 0.99],
            Self::R0 => vec![1.25, 1.5, 2.0],
            Self::PAsymptomatic => vec![0.20, 0.33, 0.50],
            Self::LfdShift => vec![-1.0, 0.0, 1.0],
        }
    }

    fn check(self, value: f64) -> Result<(), ParamError> {
        let ok = match self {
            Self::PcrLod => value.is_finite() && value > 0.0,
            Self::PcrSensitivity | Self::PAsymptomatic => (0.0..=1.0).contains(&value),
            Self::R0 => value.is_finite() && value >= 0.0,
            Self::LfdShift => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(ParamError::new(self.name(), value, "outside the parameter's domain"))
        }
    }

    /// Apply `value` to copies of the baseline inputs.
    fn apply(
        self,
        value: f64,
        plan: &EvaluationPlan,
        lfd: &LfdModel,
        pcr: &PcrModel,
    ) -> (EvaluationPlan, LfdModel, PcrModel) {
        let (mut plan, mut lfd, mut pcr) = (plan.clone(), *lfd, *pcr);
        match self {
            Self::PcrLod => pcr.lod = value,
            Self::PcrSensitivity => pcr.sensitivity = value,
            Self::R0 => plan.pathogen.r0 = value,
            Self::PAsymptomatic => plan.pathogen.p_asymptomatic = value,
            Self::LfdShift => lfd.shift = value,
        }
        (plan, lfd, pcr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl SweepGrid {
    pub fn with_defaults(axis: SweepAxis) -> Self {
        Self { axis, values: axis.default_values() }
    }

    pub fn validate(&self) -> Result<(), KpiError> {
        if self.values.is_empty() {
            return Err(KpiError::Plan(format!("sweep over {} has no values", self.axis.name())));
        }
        self.values.iter().try_for_each(|&v| self.axis.check(v))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub value: f64,
    pub table: KpiTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub axis: SweepAxis,
    pub cells: Vec<SweepCell>,
}

/// Evaluate each grid value with every other input at baseline. Cell `i`
/// uses master seed `derive_seed(base.master_seed, [axis, i])`.
pub fn sweep(
    base: &EvaluationPlan,
    grid: &SweepGrid,
    posterior: &[PopulationHyperparams],
    lfd: &LfdModel,
    pcr: &PcrModel,
) -> Result<SweepResult, KpiError> {
    grid.validate()?;
    let axis_tag = SweepAxis::ALL.iter().position(|&a| a == grid.axis).expect("listed") as u64;
    // validate every cell before running any
    let cells: Vec<_> = grid
        .values
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let (mut plan, lfd, pcr) = grid.axis.apply(value, base, lfd, pcr);
            plan.master_seed = seed::derive_seed(base.master_seed, &[axis_tag, i as u64]);
            plan.validate()?;
            lfd.validate()?;
            pcr.validate()?;
            Ok((value, plan, lfd, pcr))
        })
        .collect::<Result<_, KpiError>>()?;
    let cells = cells
        .into_iter()
        .map(|(value, plan, lfd, pcr)| Ok(SweepCell { value, table: evaluate(&plan, posterior, &lfd, &pcr)? }))
        .collect::<Result<_, KpiError>>()?;
    Ok(SweepResult { schema_version: SCHEMA_VERSION, axis: grid.axis, cells })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_rows<W: Write>(
    w: &mut csv::Writer<W>,
    axis: &str,
    axis_value: &str,
    table: &KpiTable,
) -> Result<(), csv::Error> {
    for s in &table.strategies {
        for entry in &s.metrics {
            let sm = entry.summary;
            w.write_record([
                SCHEMA_VERSION.to_string(),
                axis.to_string(),
                axis_value.to_string(),
                s.strategy.name().to_string(),
                entry.metric.name().to_string(),
                fmt_opt(sm.map(|x| x.mean)),
                fmt_opt(sm.map(|x| x.lower)),
                fmt_opt(sm.map(|x| x.upper)),
                sm.map_or(0, |x| x.n_draws).to_string(),
            ])?;
        }
    }
    Ok(())
}

/// Long-format CSV, one row per strategy × metric. `axis` columns are empty.
pub fn write_kpi_csv<W: Write>(table: &KpiTable, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(KPI_COLUMNS)?;
    write_rows(&mut w, "", "", table)?;
    w.flush()?;
    Ok(())
}

/// Long-format CSV, one row per axis value × strategy × metric.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(KPI_COLUMNS)?;
    for cell in &result.cells {
        write_rows(&mut w, result.axis.name(), &cell.value.to_string(), &cell.table)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_kpi_json<W: Write>(table: &KpiTable, writer: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(writer, table)
}

pub fn write_sweep_json<W: Write>(result: &SweepResult, writer: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(writer, result)
}
