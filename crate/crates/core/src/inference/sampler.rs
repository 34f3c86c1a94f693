//! Adaptive random-walk Metropolis blocks and chain diagnostics.
//!
//! Each block proposes `x' = x + λ·L·z` with `z ~ N(0, I)`, where `L` is the
//! Cholesky factor of the block's empirical covariance (plus a small ridge)
//! and `log λ` follows a Robbins–Monro recursion towards a target acceptance
//! rate with step `n^-0.6`. Adaptation runs only while `adapting` is set;
//! once frozen the block is an ordinary symmetric random-walk kernel.

use rand::Rng;
use rand_distr::StandardNormal;

const RIDGE: f64 = 1e-8;
const COV_REFRESH: u64 = 50;

#[derive(Debug, Clone)]
pub struct AdaptiveBlock {
    dim: usize,
    log_scale: f64,
    target_accept: f64,
    chol: Vec<f64>,
    mean: Vec<f64>,
    // sum of outer products of deviations (Welford)
    scatter: Vec<f64>,
    n_seen: u64,
    n_adapt_steps: u64,
    adapting: bool,
    has_empirical: bool,
    accepted: u64,
    proposed: u64,
}

impl AdaptiveBlock {
    /// A block with diagonal initial proposal sds `initial_sd`.
    pub fn new(initial_sd: &[f64], target_accept: f64) -> Self {
        let dim = initial_sd.len();
        assert!(dim > 0, "empty block");
        let mut chol = vec![0.0; dim * dim];
        for (i, sd) in initial_sd.iter().enumerate() {
            chol[i * dim + i] = *sd;
        }
        Self {
            dim,
            log_scale: 0.0,
            target_accept,
            chol,
            mean: vec![0.0; dim],
            scatter: vec![0.0; dim * dim],
            n_seen: 0,
            n_adapt_steps: 0,
            adapting: true,
            has_empirical: false,
            accepted: 0,
            proposed: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stop adapting and reset the acceptance counters.
    pub fn freeze(&mut self) {
        self.adapting = false;
        self.accepted = 0;
        self.proposed = 0;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn counts(&self) -> (u64, u64) {
        (self.accepted, self.proposed)
    }

    fn propose<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R, out: &mut [f64]) {
        let scale = self.log_scale.exp();
        let z: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..self.dim {
            let row = &self.chol[i * self.dim..=i * self.dim + i];
            let step: f64 = row.iter().zip(&z).map(|(l, zi)| l * zi).sum();
            out[i] = x[i] + scale * step;
        }
    }

    /// One Metropolis update of `x` under `log_target`.
    ///
    /// `current` must equal `log_target(x)`; it is updated on acceptance.
    /// Returns whether the proposal was accepted.
    pub fn step<R, F>(&mut self, x: &mut [f64], current: &mut f64, mut log_target: F, rng: &mut R) -> bool
    where
        R: Rng + ?Sized,
        F: FnMut(&[f64]) -> f64,
    {
        let mut candidate = vec![0.0; self.dim];
        self.propose(x, rng, &mut candidate);
        let proposed_lp = log_target(&candidate);
        let log_ratio = proposed_lp - *current;
        let accept_prob = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
        let accept = proposed_lp > f64::NEG_INFINITY
            && (log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio);
        if accept {
            x.copy_from_slice(&candidate);
            *current = proposed_lp;
        }
        self.proposed += 1;
        self.accepted += u64::from(accept);
        if self.adapting {
            self.adapt(x, accept_prob);
        }
        accept
    }

    fn adapt(&mut self, x: &[f64], accept_prob: f64) {
        self.n_adapt_steps += 1;
        let gamma = (self.n_adapt_steps as f64).powf(-0.6);
        self.log_scale += gamma * (accept_prob - self.target_accept);
        self.log_scale = self.log_scale.clamp(-30.0, 10.0);

        self.n_seen += 1;
        let n = self.n_seen as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.scatter[i * self.dim + j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
        if self.n_seen >= (10 * self.dim as u64).max(100) && self.n_seen % COV_REFRESH == 0 {
            self.refresh_covariance();
        }
    }

    fn refresh_covariance(&mut self) {
        let n = self.n_seen as f64;
        let d = self.dim;
        let mut cov: Vec<f64> = self.scatter.iter().map(|s| s / (n - 1.0)).collect();
        let max_diag = (0..d).map(|i| cov[i * d + i]).fold(0.0, f64::max);
        if !(max_diag > 0.0) {
            return;
        }
        for i in 0..d {
            cov[i * d + i] += RIDGE * max_diag.max(1.0) + 1e-12;
        }
        if let Some(l) = cholesky(&cov, d) {
            if !self.has_empirical {
                // Haario et al. scaling for a Gaussian-shaped proposal
                self.log_scale = (2.38 / (d as f64).sqrt()).ln();
                self.has_empirical = true;
            }
            self.chol = l;
        }
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let v = a[i * n + i] - s;
                if !(v > 0.0) {
                    return None;
                }
                l[i * n + j] = v.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Effective sample size across chains, each given as a slice of draws.
///
/// Autocorrelations are averaged over chains and truncated with Geyer's
/// initial monotone positive-sequence rule.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let total = (m * n) as f64;
    let means: Vec<f64> = chains.iter().map(|c| c[..n].iter().sum::<f64>() / n as f64).collect();
    let vars: Vec<f64> = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c[..n].iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n as f64)
        .collect();
    let w = vars.iter().sum::<f64>() / m as f64;
    if !(w > 0.0) {
        return total;
    }
    let grand = means.iter().sum::<f64>() / m as f64;
    let b_over_n = if m > 1 {
        means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (m - 1) as f64
    } else {
        0.0
    };
    let var_plus = w * (n as f64 - 1.0) / n as f64 + b_over_n;

    let autocov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, mu)| {
                (0..n - lag).map(|t| (c[t] - mu) * (c[t + lag] - mu)).sum::<f64>() / n as f64
            })
            .sum::<f64>()
            / m as f64
    };
    let rho = |lag: usize| 1.0 - (w - autocov(lag)) / var_plus;

    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = if lag == 0 { 1.0 + rho(1) } else { rho(lag) + rho(lag + 1) };
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum_pairs += pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = (2.0 * sum_pairs - 1.0).max(1e-3);
    (total / tau).min(total * total.log10())
}

/// Split-chain potential scale reduction factor.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0) / 2;
    if n < 2 {
        return f64::NAN;
    }
    let halves: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..n], &c[n..2 * n]]).collect();
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n as f64 * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (m - 1.0);
    let w = halves
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n as f64 - 1.0))
        .sum::<f64>()
        / m;
    if !(w > 0.0) {
        return 1.0;
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    (var_plus / w).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::normal_ln_pdf;
    use crate::seed;

    #[test]
    fn cholesky_reconstructs() {
        let a = [4.0, 2.0, 0.6, 2.0, 2.0, 0.5, 0.6, 0.5, 3.0];
        let l = cholesky(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((v - a[i * 3 + j]).abs() < 1e-12);
            }
        }
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }

    #[test]
    fn ess_of_independent_draws_is_near_n() {
        let mut rng = seed::stream(5, &[]);
        let a: Vec<f64> = (0..4000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..4000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let ess = effective_sample_size(&[&a, &b]);
        assert!(ess > 6000.0 && ess < 10_000.0, "{ess}");
        let r = split_rhat(&[&a, &b]);
        assert!((r - 1.0).abs() < 0.02, "{r}");
    }

    #[test]
    fn ess_of_ar1_matches_theory() {
        // AR(1) with phi = 0.9: tau = (1 + phi) / (1 - phi) = 19
        let mut rng = seed::stream(6, &[]);
        let mut x = 0.0;
        let chain: Vec<f64> = (0..200_000)
            .map(|_| {
                x = 0.9 * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let ess = effective_sample_size(&[&chain]);
        let expected = 200_000.0 / 19.0;
        assert!((ess / expected - 1.0).abs() < 0.15, "{ess} vs {expected}");
    }

    /// Conjugate normal mean with known variance, sampled through the same
    /// block machinery the trajectory model uses.
    #[test]
    fn recovers_conjugate_normal_posterior() {
        let mut rng = seed::stream(9, &[]);
        let data: Vec<f64> = (0..20).map(|i| 1.0 + 0.37 * (i as f64 - 9.5) / 5.0).collect();
        let (sigma, prior_mean, prior_sd) = (2.0f64, -1.0f64, 3.0f64);
        let n = data.len() as f64;
        let post_prec = 1.0 / prior_sd.powi(2) + n / sigma.powi(2);
        let post_var = 1.0 / post_prec;
        let post_mean = post_var * (prior_mean / prior_sd.powi(2) + data.iter().sum::<f64>() / sigma.powi(2));

        let log_target = |x: &[f64]| {
            normal_ln_pdf(x[0], prior_mean, prior_sd)
                + data.iter().map(|y| normal_ln_pdf(*y, x[0], sigma)).sum::<f64>()
        };
        let mut block = AdaptiveBlock::new(&[1.0], 0.44);
        let mut x = [5.0];
        let mut lp = log_target(&x);
        for _ in 0..5_000 {
            block.step(&mut x, &mut lp, log_target, &mut rng);
        }
        block.freeze();
        let draws: Vec<f64> = (0..200_000)
            .map(|_| {
                block.step(&mut x, &mut lp, log_target, &mut rng);
                x[0]
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        let ess = effective_sample_size(&[&draws]);
        let mc_se = (post_var / ess).sqrt();
        assert!((mean - post_mean).abs() < 5.0 * mc_se, "{mean} vs {post_mean}");
        assert!((var / post_var - 1.0).abs() < 0.05, "{var} vs {post_var}");
        let rate = block.acceptance_rate();
        assert!((0.2..=0.6).contains(&rate), "{rate}");
    }

    #[test]
    fn adapts_to_correlated_target() {
        // strongly correlated 2-d gaussian
        let rho: f64 = 0.95;
        let det = 1.0 - rho * rho;
        let log_target = |x: &[f64]| -0.5 * (x[0] * x[0] - 2.0 * rho * x[0] * x[1] + x[1] * x[1]) / det;
        let mut rng = seed::stream(10, &[]);
        let mut block = AdaptiveBlock::new(&[0.1, 0.1], 0.3);
        let mut x = [0.0, 0.0];
        let mut lp = log_target(&x);
        for _ in 0..20_000 {
            block.step(&mut x, &mut lp, log_target, &mut rng);
        }
        block.freeze();
        let mut sxy = 0.0;
        let n = 100_000;
        for _ in 0..n {
            block.step(&mut x, &mut lp, log_target, &mut rng);
            sxy += x[0] * x[1];
        }
        let rate = block.acceptance_rate();
        assert!((0.2..=0.45).contains(&rate), "{rate}");
        assert!((sxy / n as f64 - rho).abs() < 0.1, "{}", sxy / n as f64);
    }
}
