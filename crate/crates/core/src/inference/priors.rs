use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::NormalPrior;
use crate::kinetics::PopulationHyperparams;
use crate::ParamError;

/// Hyperpriors. Every parameter except `mu_p` is positive, so its normal
/// prior acts as a normal truncated to `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSet {
    pub mu_p: NormalPrior,
    pub sigma_p: NormalPrior,
    pub alpha_i2p: NormalPrior,
    pub beta_i2p: NormalPrior,
    pub alpha_p2c: NormalPrior,
    pub beta_p2c: NormalPrior,
    /// Observation noise; the default is a half-normal with scale 1.
    #[serde(default = "default_sigma_obs_prior")]
    pub sigma_obs: NormalPrior,
}

fn default_sigma_obs_prior() -> NormalPrior {
    NormalPrior::new(0.0, 1.0)
}

pub const PRESET_NAMES: [&str; 2] = ["sars2-mid-turbinate", "influenza"];

impl PriorSet {
    /// Priors for SARS-CoV-2 mid-turbinate trajectories.
    pub fn sars2_mid_turbinate() -> Self {
        Self {
            mu_p: NormalPrior::new(9f64.ln(), 3.0),
            sigma_p: NormalPrior::new(0.0, 3.0),
            alpha_i2p: NormalPrior::new(4.0, 2.0),
            beta_i2p: NormalPrior::new(4.0, 2.0),
            alpha_p2c: NormalPrior::new(6.0, 2.0),
            beta_p2c: NormalPrior::new(4.0, 2.0),
            sigma_obs: default_sigma_obs_prior(),
        }
    }

    /// Priors for influenza A/B trajectories.
    pub fn influenza() -> Self {
        Self {
            mu_p: NormalPrior::new(5f64.ln(), 1.0),
            sigma_p: NormalPrior::new(1.0, 1.0),
            alpha_i2p: NormalPrior::new(5.0, 3.0),
            beta_i2p: NormalPrior::new(4.0, 1.0),
            alpha_p2c: NormalPrior::new(7.0, 2.0),
            beta_p2c: NormalPrior::new(5.0, 1.0),
            sigma_obs: default_sigma_obs_prior(),
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "sars2-mid-turbinate" => Some(Self::sars2_mid_turbinate()),
            "influenza" => Some(Self::influenza()),
            _ => None,
        }
    }

    fn entries(&self) -> [(&'static str, NormalPrior); 7] {
        [
            ("mu_p", self.mu_p),
            ("sigma_p", self.sigma_p),
            ("alpha_i2p", self.alpha_i2p),
            ("beta_i2p", self.beta_i2p),
            ("alpha_p2c", self.alpha_p2c),
            ("beta_p2c", self.beta_p2c),
            ("sigma_obs", self.sigma_obs),
        ]
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.entries()
            .into_iter()
            .try_for_each(|(name, prior)| prior.validate(name))
    }

    /// Log hyperprior density, up to a constant. `-inf` if any positive
    /// parameter is not positive.
    pub fn ln_density(&self, hyper: &PopulationHyperparams) -> f64 {
        let values = hyper.to_array();
        let mut total = 0.0;
        for (i, ((_, prior), x)) in self.entries().into_iter().zip(values).enumerate() {
            if i > 0 && !(x > 0.0) {
                return f64::NEG_INFINITY;
            }
            total += prior.ln_pdf(x);
        }
        total
    }

    /// Draw a hyperparameter set from the priors (prior-predictive mode).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PopulationHyperparams {
        PopulationHyperparams {
            mu_p: self.mu_p.sample(rng),
            sigma_p: self.sigma_p.sample_positive(rng),
            alpha_i2p: self.alpha_i2p.sample_positive(rng),
            beta_i2p: self.beta_i2p.sample_positive(rng),
            alpha_p2c: self.alpha_p2c.sample_positive(rng),
            beta_p2c: self.beta_p2c.sample_positive(rng),
            sigma_obs: self.sigma_obs.sample_positive(rng),
        }
    }
}
