//! Joint log-density of the hierarchical trajectory model.

use crate::dist::{gamma_ln_pdf, lognormal_ln_pdf, normal_ln_pdf, std_normal_ln_cdf};
use crate::kinetics::{PopulationHyperparams, TrajectoryParams};

use super::data::{AnchorMode, CaseSeries, Dataset, Measurement};
use super::priors::PriorSet;

/// `ln P(y < threshold)` for `y ~ N(mean, sd)`: the contribution of a negative swab.
pub fn censored_ln_prob(mean: f64, threshold: f64, sd: f64) -> f64 {
    std_normal_ln_cdf((threshold - mean) / sd)
}

/// Log-likelihood of one case's swabs, split into detected and censored parts.
///
/// `incubation` shifts onset-relative times to infection-relative ones; pass
/// 0 for infection-anchored data.
pub fn case_log_likelihood(
    case: &CaseSeries,
    traj: &TrajectoryParams,
    incubation: f64,
    sigma_obs: f64,
    censor_threshold: f64,
) -> (f64, f64) {
    let mut detected = 0.0;
    let mut censored = 0.0;
    for (t, m) in case.iter() {
        let mean = traj.concentration(incubation + t);
        match m {
            Measurement::Detected(y) => detected += normal_ln_pdf(y, mean, sigma_obs),
            Measurement::Censored => censored += censored_ln_prob(mean, censor_threshold, sigma_obs),
        }
    }
    (detected, censored)
}

/// Log-density of one case's trajectory under the population distributions.
pub fn population_ln_density(traj: &TrajectoryParams, hyper: &PopulationHyperparams) -> f64 {
    lognormal_ln_pdf(traj.peak, hyper.mu_p, hyper.sigma_p)
        + gamma_ln_pdf(traj.rise_days, hyper.alpha_i2p, hyper.beta_i2p)
        + gamma_ln_pdf(traj.decay_days, hyper.alpha_p2c, hyper.beta_p2c)
}

/// The additive pieces of [`log_posterior`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PosteriorTerms {
    pub detected: f64,
    pub censored: f64,
    pub population: f64,
    pub incubation: f64,
    pub hyperprior: f64,
}

impl PosteriorTerms {
    pub fn total(&self) -> f64 {
        self.detected + self.censored + self.population + self.incubation + self.hyperprior
    }

    /// Name of the first term that is not finite, if any.
    pub fn first_nonfinite(&self) -> Option<&'static str> {
        [
            ("likelihood of detected observations", self.detected),
            ("likelihood of censored observations", self.censored),
            ("population density of case trajectories", self.population),
            ("incubation-period density", self.incubation),
            ("hyperprior", self.hyperprior),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(name, _)| name)
    }
}

/// Evaluate every term of the log posterior.
///
/// # Panics
/// If `case_params` (or, for onset-anchored data, `latent_incubations`) does
/// not have one entry per case.
pub fn posterior_terms(
    dataset: &Dataset,
    case_params: &[TrajectoryParams],
    latent_incubations: &[f64],
    hyper: &PopulationHyperparams,
    priors: &PriorSet,
) -> PosteriorTerms {
    assert_eq!(case_params.len(), dataset.n_cases(), "one trajectory per case");
    let incubation_prior = match dataset.anchor {
        AnchorMode::Infection => None,
        AnchorMode::Onset { incubation } => {
            assert_eq!(latent_incubations.len(), dataset.n_cases(), "one incubation per case");
            Some(incubation)
        }
    };

    let mut terms = PosteriorTerms {
        hyperprior: priors.ln_density(hyper),
        ..Default::default()
    };
    if hyper.validate().is_err() {
        terms.hyperprior = f64::NEG_INFINITY;
        return terms;
    }
    for (i, (case, traj)) in dataset.cases.iter().zip(case_params).enumerate() {
        if traj.validate().is_err() {
            terms.population = f64::NEG_INFINITY;
            return terms;
        }
        let incubation = match incubation_prior {
            Some(prior) => {
                let inc = latent_incubations[i];
                terms.incubation += prior.ln_pdf(inc);
                inc
            }
            None => 0.0,
        };
        let (det, cens) =
            case_log_likelihood(case, traj, incubation, hyper.sigma_obs, dataset.censor_threshold);
        terms.detected += det;
        terms.censored += cens;
        terms.population += population_ln_density(traj, hyper);
    }
    terms
}

/// Unnormalised log posterior of case trajectories, latent incubation
/// periods and hyperparameters. Returns `-inf` for states outside the support.
pub fn log_posterior(
    dataset: &Dataset,
    case_params: &[TrajectoryParams],
    latent_incubations: &[f64],
    hyper: &PopulationHyperparams,
    priors: &PriorSet,
) -> f64 {
    let total = posterior_terms(dataset, case_params, latent_incubations, hyper, priors).total();
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}
