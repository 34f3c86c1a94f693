//! Piecewise-linear viral-concentration trajectories on the log₁₀ scale.
//!
//! A trajectory rises linearly from 0 at infection to its peak, then falls
//! linearly to 0 at clearance. Values are returned unclamped: after clearance
//! (and before infection) the line continues below zero, and consumers treat
//! `v <= 0` as "no detectable virus".

use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{require_finite, require_positive, ParamError};

/// One case's trajectory: peak concentration and the two segment durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryParams {
    /// Peak concentration, log₁₀ gene copies·ml⁻¹.
    pub peak: f64,
    /// Days from infection to peak.
    pub rise_days: f64,
    /// Days from peak to clearance.
    pub decay_days: f64,
}

impl TrajectoryParams {
    pub fn new(peak: f64, rise_days: f64, decay_days: f64) -> Result<Self, ParamError> {
        let params = Self {
            peak,
            rise_days,
            decay_days,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        require_positive("peak", self.peak)?;
        require_positive("rise_days", self.rise_days)?;
        require_positive("decay_days", self.decay_days)
    }

    /// Days from infection to clearance.
    pub fn clearance_day(&self) -> f64 {
        self.rise_days + self.decay_days
    }

    /// Concentration at `tau` days since infection. See [`viral_concentration`].
    #[inline]
    pub fn concentration(&self, tau: f64) -> f64 {
        if tau <= self.rise_days {
            tau * self.peak / self.rise_days
        } else {
            self.peak - (tau - self.rise_days) * self.peak / self.decay_days
        }
    }
}

/// Log₁₀ concentration `tau` days after infection.
///
/// Fails only when `params` violates its invariants; a struct built through
/// [`TrajectoryParams::new`] never does.
pub fn viral_concentration(tau: f64, params: &TrajectoryParams) -> Result<f64, ParamError> {
    params.validate()?;
    require_finite("tau", tau)?;
    Ok(params.concentration(tau))
}

/// Population-level distribution of trajectory parameters plus the
/// observation noise used when fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationHyperparams {
    /// Log-scale mean of the lognormal peak distribution.
    pub mu_p: f64,
    /// Log-scale sd of the lognormal peak distribution.
    pub sigma_p: f64,
    pub alpha_i2p: f64,
    pub beta_i2p: f64,
    pub alpha_p2c: f64,
    pub beta_p2c: f64,
    /// Observation noise sd, log₁₀ units.
    pub sigma_obs: f64,
}

impl PopulationHyperparams {
    pub const NAMES: [&'static str; 7] = [
        "mu_p",
        "sigma_p",
        "alpha_i2p",
        "beta_i2p",
        "alpha_p2c",
        "beta_p2c",
        "sigma_obs",
    ];

    pub fn validate(&self) -> Result<(), ParamError> {
        require_finite("mu_p", self.mu_p)?;
        require_positive("sigma_p", self.sigma_p)?;
        require_positive("alpha_i2p", self.alpha_i2p)?;
        require_positive("beta_i2p", self.beta_i2p)?;
        require_positive("alpha_p2c", self.alpha_p2c)?;
        require_positive("beta_p2c", self.beta_p2c)?;
        require_positive("sigma_obs", self.sigma_obs)
    }

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.mu_p,
            self.sigma_p,
            self.alpha_i2p,
            self.beta_i2p,
            self.alpha_p2c,
            self.beta_p2c,
            self.sigma_obs,
        ]
    }

    pub fn from_array(v: [f64; 7]) -> Self {
        Self {
            mu_p: v[0],
            sigma_p: v[1],
            alpha_i2p: v[2],
            beta_i2p: v[3],
            alpha_p2c: v[4],
            beta_p2c: v[5],
            sigma_obs: v[6],
        }
    }

    /// Build reusable samplers for [`sample_trajectory`]-style draws.
    pub fn sampler(&self) -> Result<TrajectorySampler, ParamError> {
        self.validate()?;
        Ok(TrajectorySampler {
            peak: LogNormal::new(self.mu_p, self.sigma_p)
                .map_err(|_| ParamError::new("sigma_p", self.sigma_p, "lognormal rejected"))?,
            rise: Gamma::new(self.alpha_i2p, 1.0 / self.beta_i2p)
                .map_err(|_| ParamError::new("alpha_i2p", self.alpha_i2p, "gamma rejected"))?,
            decay: Gamma::new(self.alpha_p2c, 1.0 / self.beta_p2c)
                .map_err(|_| ParamError::new("alpha_p2c", self.alpha_p2c, "gamma rejected"))?,
        })
    }
}

/// Pre-built marginals of a [`PopulationHyperparams`].
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySampler {
    peak: LogNormal<f64>,
    rise: Gamma<f64>,
    decay: Gamma<f64>,
}

impl Distribution<TrajectoryParams> for TrajectorySampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TrajectoryParams {
        // Gamma draws can underflow to exactly 0 for tiny shapes.
        let positive = |x: f64| x.max(f64::MIN_POSITIVE);
        TrajectoryParams {
            peak: positive(self.peak.sample(rng)),
            rise_days: positive(self.rise.sample(rng)),
            decay_days: positive(self.decay.sample(rng)),
        }
    }
}

/// Draw one case's trajectory from the population distributions.
pub fn sample_trajectory<R: Rng + ?Sized>(
    hyper: &PopulationHyperparams,
    rng: &mut R,
) -> Result<TrajectoryParams, ParamError> {
    Ok(hyper.sampler()?.sample(rng))
}
