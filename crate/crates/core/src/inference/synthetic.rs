//! Synthetic swab data drawn from known hyperparameters, for recovery
//! checks and for running the pipeline without restricted study data.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::kinetics::{PopulationHyperparams, TrajectoryParams};
use crate::ParamError;

use super::data::{AnchorMode, Dataset, Measurement, ObservationRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDesign {
    pub n_cases: usize,
    /// Days since infection at which every case is swabbed.
    pub obs_times: Vec<f64>,
    /// Share of all observations to censor: the threshold is set at this
    /// quantile of the noisy values.
    pub censor_fraction: f64,
}

impl Default for SyntheticDesign {
    fn default() -> Self {
        Self {
            n_cases: 30,
            obs_times: (1..=10).map(f64::from).collect(),
            censor_fraction: 0.2,
        }
    }
}

/// A generated dataset and the trajectories behind it.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub trajectories: Vec<TrajectoryParams>,
}

/// Draw infection-anchored data: `value = f(t) + N(0, sigma_obs)`, censored
/// below the `censor_fraction` quantile.
pub fn simulate_dataset<R: Rng + ?Sized>(
    hyper: &PopulationHyperparams,
    design: &SyntheticDesign,
    rng: &mut R,
) -> Result<SyntheticData, ParamError> {
    if design.n_cases == 0 || design.obs_times.is_empty() {
        return Err(ParamError::new("n_cases", design.n_cases as f64, "design has no observations"));
    }
    if !(0.0..1.0).contains(&design.censor_fraction) {
        return Err(ParamError::new("censor_fraction", design.censor_fraction, "must lie in [0, 1)"));
    }
    let sampler = hyper.sampler()?;
    let noise = Normal::new(0.0, hyper.sigma_obs).map_err(|_| ParamError::new("sigma_obs", hyper.sigma_obs, "normal rejected"))?;
    let mut trajectories = Vec::with_capacity(design.n_cases);
    let mut raw = Vec::with_capacity(design.n_cases * design.obs_times.len());
    for c in 0..design.n_cases {
        let traj: TrajectoryParams = sampler.sample(rng);
        for &t in &design.obs_times {
            raw.push((c, t, traj.concentration(t) + noise.sample(rng)));
        }
        trajectories.push(traj);
    }

    let mut sorted: Vec<f64> = raw.iter().map(|r| r.2).collect();
    sorted.sort_by(f64::total_cmp);
    let k = (design.censor_fraction * sorted.len() as f64).round() as usize;
    // everything strictly below the threshold is censored
    let threshold = if k == 0 { sorted[0] } else if k < sorted.len() { 0.5 * (sorted[k - 1] + sorted[k]) } else { sorted[k - 1] };

    let records = raw
        .into_iter()
        .map(|(c, t, y)| ObservationRecord {
            case_id: format!("case{:03}", c + 1),
            t_anchor: t,
            measurement: if y < threshold { Measurement::Censored } else { Measurement::Detected(y) },
        })
        .collect();
    let dataset = Dataset::new(AnchorMode::Infection, records, threshold)
        .map_err(|_| ParamError::new("censor_threshold", threshold, "dataset rejected"))?;
    Ok(SyntheticData { dataset, trajectories })
}
