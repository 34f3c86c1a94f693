//! Small distribution toolkit shared by the simulator and the sampler.
//!
//! Gamma distributions are parameterised by shape and **rate** everywhere.

use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{require_finite, require_positive, ParamError};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log-density of `N(mean, sd²)` at `x`.
pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// `ln Φ(z)` for the standard normal CDF, accurate deep into the lower tail.
pub fn std_normal_ln_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < -30.0 {
        // Asymptotic series; erfc underflows past z ≈ -38.
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        return -0.5 * z2 - (-z).ln() - LN_SQRT_2PI + series.ln();
    }
    (0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln()
}

/// Log-density of a gamma(shape, rate) at `x`; `-inf` outside the support.
pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Log-density of a lognormal with log-scale mean `meanlog` and sd `sdlog`.
pub fn lognormal_ln_pdf(x: f64, meanlog: f64, sdlog: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return f64::NEG_INFINITY;
    }
    normal_ln_pdf(x.ln(), meanlog, sdlog) - x.ln()
}

/// A positive delay distribution (incubation period, generation time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DelayDistribution {
    Gamma { shape: f64, rate: f64 },
    LogNormal { meanlog: f64, sdlog: f64 },
}

impl DelayDistribution {
    pub fn validate(&self) -> Result<(), ParamError> {
        match *self {
            Self::Gamma { shape, rate } => {
                require_positive("shape", shape)?;
                require_positive("rate", rate)
            }
            Self::LogNormal { meanlog, sdlog } => {
                require_finite("meanlog", meanlog)?;
                require_positive("sdlog", sdlog)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Gamma { shape, rate } => shape / rate,
            Self::LogNormal { meanlog, sdlog } => (meanlog + 0.5 * sdlog * sdlog).exp(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Gamma { shape, rate } => shape / (rate * rate),
            Self::LogNormal { meanlog, sdlog } => {
                let s2 = sdlog * sdlog;
                (s2.exp() - 1.0) * (2.0 * meanlog + s2).exp()
            }
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Gamma { shape, rate } => gamma_ln_pdf(x, shape, rate),
            Self::LogNormal { meanlog, sdlog } => lognormal_ln_pdf(x, meanlog, sdlog),
        }
    }

    /// Build a reusable sampler. Panics only if `validate` would fail.
    pub fn sampler(&self) -> DelaySampler {
        match *self {
            Self::Gamma { shape, rate } => {
                DelaySampler::Gamma(Gamma::new(shape, 1.0 / rate).expect("validated gamma"))
            }
            Self::LogNormal { meanlog, sdlog } => {
                DelaySampler::LogNormal(LogNormal::new(meanlog, sdlog).expect("validated lognormal"))
            }
        }
    }
}

/// Pre-built sampler for a [`DelayDistribution`].
#[derive(Debug, Clone, Copy)]
pub enum DelaySampler {
    Gamma(Gamma<f64>),
    LogNormal(LogNormal<f64>),
}

impl Distribution<f64> for DelaySampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gamma(g) => g.sample(rng),
            Self::LogNormal(l) => l.sample(rng),
        }
    }
}

/// Normal prior `N(mean, sd)`; `sd` is a standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

impl NormalPrior {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    pub fn validate(&self, name: &'static str) -> Result<(), ParamError> {
        require_finite(name, self.mean)?;
        require_positive(name, self.sd)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        normal_ln_pdf(x, self.mean, self.sd)
    }

    /// Draw from the prior restricted to `(0, ∞)` by rejection.
    ///
    /// Falls back to inverse-CDF sampling when the positive mass is tiny.
    pub fn sample_positive<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let normal = rand_distr::Normal::new(self.mean, self.sd).expect("validated prior");
        for _ in 0..1000 {
            let x = normal.sample(rng);
            if x > 0.0 {
                return x;
            }
        }
        // Deep truncation: the conditional is close to exponential above 0.
        let tail_rate = -self.mean / (self.sd * self.sd);
        rand_distr::Exp::new(tail_rate).expect("positive rate").sample(rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rand_distr::Normal::new(self.mean, self.sd)
            .expect("validated prior")
            .sample(rng)
    }
}
