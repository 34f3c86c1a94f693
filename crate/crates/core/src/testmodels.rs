//! Test-result models: LFD sensitivity as a logistic in log₁₀ concentration,
//! PCR as a limit-of-detection step.
//!
//! Specificity is fixed at 1: a case with no detectable virus never tests positive.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{require_finite, require_positive, require_probability, ParamError};

/// Logistic LFD sensitivity curve.
///
/// There is deliberately no default for the coefficients: they must come from
/// a published device evaluation and be supplied through configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfdModel {
    pub intercept: f64,
    /// Slope per log₁₀ copies·ml⁻¹; must be positive.
    pub slope: f64,
    /// Shift on the log₁₀ scale. Positive values make the device more
    /// sensitive, as if the sample held `10^shift` times more virus.
    #[serde(default)]
    pub shift: f64,
}

impl LfdModel {
    pub fn new(intercept: f64, slope: f64, shift: f64) -> Result<Self, ParamError> {
        let model = Self {
            intercept,
            slope,
            shift,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        require_finite("lfd.intercept", self.intercept)?;
        require_positive("lfd.slope", self.slope)?;
        require_finite("lfd.shift", self.shift)
    }

    pub fn with_shift(self, shift: f64) -> Self {
        Self { shift, ..self }
    }

    /// Probability of a positive LFD at log₁₀ concentration `v`.
    pub fn sensitivity(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        logistic(self.intercept + self.slope * (v + self.shift))
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Free-function form of [`LfdModel::sensitivity`].
pub fn lfd_sensitivity(v: f64, model: &LfdModel) -> f64 {
    model.sensitivity(v)
}

/// PCR limit-of-detection model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcrModel {
    /// Limit of detection, log₁₀ copies·ml⁻¹. A sample exactly at the limit is detectable.
    pub lod: f64,
    /// Probability of a positive result at or above the limit.
    pub sensitivity: f64,
    /// Days from swab to result.
    pub turnaround: f64,
}

impl Default for PcrModel {
    fn default() -> Self {
        Self {
            lod: 500f64.log10(),
            sensitivity: 0.95,
            turnaround: 2.0,
        }
    }
}

impl PcrModel {
    pub fn validate(&self) -> Result<(), ParamError> {
        require_positive("pcr.lod", self.lod)?;
        require_probability("pcr.sensitivity", self.sensitivity)?;
        if !(self.turnaround.is_finite() && self.turnaround >= 0.0) {
            return Err(ParamError::new(
                "pcr.turnaround",
                self.turnaround,
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// Probability of a positive PCR at log₁₀ concentration `v`.
    pub fn positive_prob(&self, v: f64) -> f64 {
        // lod > 0, so v <= 0 (no virus) is always below the limit
        if v >= self.lod {
            self.sensitivity
        } else {
            0.0
        }
    }
}

/// Free-function form of [`PcrModel::positive_prob`].
pub fn pcr_positive_prob(v: f64, model: &PcrModel) -> f64 {
    model.positive_prob(v)
}

/// Decide a result from a pre-drawn uniform in `[0, 1)`.
///
/// Sharing the uniform between strategies that perform the same test is
/// what couples them under common random numbers.
#[inline]
pub fn result_from_uniform(prob: f64, u: f64) -> bool {
    u < prob
}

/// Bernoulli draw of a test result.
pub fn sample_result<R: Rng + ?Sized>(prob: f64, rng: &mut R) -> bool {
    debug_assert!((0.0..=1.0).contains(&prob));
    result_from_uniform(prob, rng.random::<f64>())
}
