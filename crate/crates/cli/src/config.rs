//! Run configuration: one TOML file, overridable from the command line.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use multiplex_core::dist::DelayDistribution;
use multiplex_core::inference::priors::PRESET_NAMES as PRIOR_PRESETS;
use multiplex_core::inference::{AnchorMode, FitConfig, PriorSet};
use multiplex_core::kpi::{EvaluationPlan, SweepAxis, SweepGrid};
use multiplex_core::outbreak::{CurveOptions, PathogenProfile, SimLimits, PATHOGEN_PRESETS};
use multiplex_core::strategies::StrategyKind;
use multiplex_core::testmodels::{LfdModel, PcrModel};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default)]
    pub pathogen: PathogenSection,
    /// No defaults: device coefficients must be chosen explicitly.
    pub lfd: LfdModel,
    #[serde(default)]
    pub pcr: PcrModel,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub inputs: InputsSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub curves: CurvesSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathogenSection {
    /// One of `sars2`, `flu-a`, `flu-b`; defaults to `sars2`. Explicit
    /// fields below override the preset.
    pub preset: Option<String>,
    pub r0: Option<f64>,
    pub p_asymptomatic: Option<f64>,
    pub generation_time: Option<DelayDistribution>,
    pub incubation: Option<DelayDistribution>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub strategies: Vec<StrategyKind>,
    pub n_posterior_draws: usize,
    pub n_replicates: usize,
    pub pairing: bool,
    pub interval_width: f64,
    pub max_infections: usize,
    pub max_time: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let plan = EvaluationPlan::default();
        Self {
            strategies: plan.strategies,
            n_posterior_draws: plan.n_posterior_draws,
            n_replicates: plan.n_replicates,
            pairing: plan.pairing,
            interval_width: plan.interval_width,
            max_infections: plan.limits.max_infections,
            max_time: plan.limits.max_time,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSection {
    /// Hyperprior preset.
    pub priors: String,
    #[serde(flatten)]
    pub sampler: FitConfig,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            priors: PRIOR_PRESETS[0].to_string(),
            sampler: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    #[default]
    Infection,
    Onset,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputsSection {
    /// Swab observations for `fit`.
    pub observations: Option<PathBuf>,
    pub anchor: Anchor,
    /// Incubation prior for onset-anchored data; defaults to the pathogen's.
    pub incubation: Option<DelayDistribution>,
    /// log₁₀ concentration below which negative swabs are censored.
    pub censor_threshold: Option<f64>,
    /// Posterior draws for `simulate` and `sweep`.
    pub posterior: Option<PathBuf>,
    /// Sample hyperparameters from the priors instead of reading a posterior.
    pub prior_predictive: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: String,
    /// Defaults to the standard grid for the axis.
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurvesSection {
    /// Pathogen presets to plot; defaults to the configured pathogen.
    pub pathogens: Vec<String>,
    pub horizon: f64,
    pub n_points: usize,
    pub n_sims: usize,
    pub condition_on_survival: bool,
}

impl Default for CurvesSection {
    fn default() -> Self {
        let o = CurveOptions::default();
        Self {
            pathogens: Vec::new(),
            horizon: o.horizon,
            n_points: o.n_points,
            n_sims: o.n_sims,
            condition_on_survival: o.condition_on_survival,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    Simulate,
    Sweep,
    Curves,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub pairing: Option<bool>,
    pub prior_predictive: bool,
    pub sweep_axis: Option<String>,
    pub sweep_values: Option<Vec<f64>>,
}

pub fn pathogen_preset(name: &str) -> Result<PathogenProfile> {
    PathogenProfile::preset(name).ok_or_else(|| {
        anyhow!("unknown pathogen preset `{name}`; valid presets are {}", PATHOGEN_PRESETS.join(", "))
    })
}

pub fn sweep_axis(name: &str) -> Result<SweepAxis> {
    SweepAxis::parse(name).ok_or_else(|| {
        let valid: Vec<_> = SweepAxis::ALL.iter().map(|a| a.name()).collect();
        anyhow!("unknown sweep axis `{name}`; valid axes are {}", valid.join(", "))
    })
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        bail!("{what} file not found: {}", path.display())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        require_file(path, "config")?;
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // relative input paths are relative to the config file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.inputs.observations, &mut cfg.inputs.posterior].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.output.dir.is_relative() {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(dir) = &o.out_dir {
            self.output.dir = dir.clone();
        }
        if let Some(p) = o.pairing {
            self.evaluation.pairing = p;
        }
        if o.prior_predictive {
            self.inputs.prior_predictive = true;
        }
        if let Some(axis) = &o.sweep_axis {
            let values = self.sweep.as_ref().filter(|s| &s.axis == axis).and_then(|s| s.values.clone());
            self.sweep = Some(SweepSection { axis: axis.clone(), values });
        }
        if let Some(values) = &o.sweep_values {
            if let Some(s) = self.sweep.as_mut() {
                s.values = Some(values.clone());
            }
        }
    }

    pub fn pathogen(&self) -> Result<PathogenProfile> {
        let p = &self.pathogen;
        let mut profile = pathogen_preset(p.preset.as_deref().unwrap_or(PATHOGEN_PRESETS[0]))?;
        if let Some(r0) = p.r0 {
            profile.r0 = r0;
        }
        if let Some(pa) = p.p_asymptomatic {
            profile.p_asymptomatic = pa;
        }
        if let Some(g) = p.generation_time {
            profile.generation_time = g;
        }
        if let Some(i) = p.incubation {
            profile.incubation = i;
        }
        profile.validate().context("[pathogen]")?;
        Ok(profile)
    }

    pub fn priors(&self) -> Result<PriorSet> {
        PriorSet::preset(&self.fit.priors).ok_or_else(|| {
            anyhow!("unknown prior preset `{}`; valid presets are {}", self.fit.priors, PRIOR_PRESETS.join(", "))
        })
    }

    pub fn plan(&self) -> Result<EvaluationPlan> {
        let e = &self.evaluation;
        let plan = EvaluationPlan {
            pathogen: self.pathogen()?,
            strategies: e.strategies.clone(),
            n_posterior_draws: e.n_posterior_draws,
            n_replicates: e.n_replicates,
            master_seed: self.seed,
            pairing: e.pairing,
            interval_width: e.interval_width,
            limits: SimLimits { max_infections: e.max_infections, max_time: e.max_time },
        };
        plan.validate().context("[evaluation]")?;
        Ok(plan)
    }

    pub fn anchor(&self) -> Result<AnchorMode> {
        Ok(match self.inputs.anchor {
            Anchor::Infection => AnchorMode::Infection,
            Anchor::Onset => AnchorMode::Onset {
                incubation: self.inputs.incubation.unwrap_or(self.pathogen()?.incubation),
            },
        })
    }

    pub fn sweep_grid(&self) -> Result<SweepGrid> {
        let s = self.sweep.as_ref().ok_or_else(|| anyhow!("no sweep axis: set [sweep].axis or pass --axis"))?;
        let axis = sweep_axis(&s.axis)?;
        let grid = SweepGrid { axis, values: s.values.clone().unwrap_or_else(|| axis.default_values()) };
        grid.validate().context("[sweep]")?;
        Ok(grid)
    }

    pub fn curve_options(&self) -> Result<CurveOptions> {
        let c = &self.curves;
        if !(c.horizon.is_finite() && c.horizon > 0.0) || c.n_points < 2 || c.n_sims == 0 {
            bail!("[curves] needs horizon > 0, n_points >= 2 and n_sims >= 1");
        }
        Ok(CurveOptions {
            horizon: c.horizon,
            n_points: c.n_points,
            n_sims: c.n_sims,
            condition_on_survival: c.condition_on_survival,
            max_infections: self.evaluation.max_infections,
        })
    }

    pub fn curve_pathogens(&self) -> Result<Vec<(String, PathogenProfile)>> {
        if self.curves.pathogens.is_empty() {
            let name = self.pathogen.preset.clone().unwrap_or_else(|| PATHOGEN_PRESETS[0].to_string());
            return Ok(vec![(name, self.pathogen()?)]);
        }
        let r0 = self.pathogen()?.r0;
        let p_asym = self.pathogen()?.p_asymptomatic;
        self.curves
            .pathogens
            .iter()
            .map(|n| Ok((n.clone(), PathogenProfile { r0, p_asymptomatic: p_asym, ..pathogen_preset(n)? })))
            .collect()
    }

    /// Check everything `cmd` will use before any work starts.
    pub fn validate(&self, cmd: Command) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version);
        }
        self.lfd.validate().context("[lfd]")?;
        self.pcr.validate().context("[pcr]")?;
        self.pathogen()?;
        match cmd {
            Command::Fit => {
                self.priors()?;
                self.fit.sampler.validate().context("[fit]")?;
                let obs = self
                    .inputs
                    .observations
                    .as_ref()
                    .ok_or_else(|| anyhow!("[inputs].observations is required for fit"))?;
                require_file(obs, "observations")?;
                match self.inputs.censor_threshold {
                    Some(t) if t.is_finite() => {}
                    _ => bail!("[inputs].censor_threshold must be set to a finite value for fit"),
                }
                if let Some(inc) = self.inputs.incubation {
                    inc.validate().context("[inputs].incubation")?;
                }
            }
            Command::Simulate | Command::Sweep => {
                self.plan()?;
                if self.inputs.prior_predictive {
                    self.priors()?;
                } else {
                    let post = self.inputs.posterior.as_ref().ok_or_else(|| {
                        anyhow!("[inputs].posterior is required unless prior-predictive mode is on")
                    })?;
                    require_file(post, "posterior")?;
                }
                if cmd == Command::Sweep {
                    self.sweep_grid()?;
                }
            }
            Command::Curves => {
                self.curve_options()?;
                self.curve_pathogens()?;
            }
        }
        Ok(())
    }
}
