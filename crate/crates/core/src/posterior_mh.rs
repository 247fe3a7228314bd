//! Posterior sampling for implicit priors.
//!
//! The prior density of `θ = g(λ, ε)` is not available, but the posterior
//! of the latent variable is: `π(ε | X) ∝ p_ε(ε) L_N(X | g(λ, ε))`. An
//! adaptive random-walk Metropolis–Hastings chain is run on `ε` and the
//! kept states are pushed through `g`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::pushforward::PriorNetwork;
use crate::rng::{self, tags};
use crate::stat_models::{probit_is_degenerate, DataSet, ModelSpec, SuffStats};

pub const MIN_SCALE: f64 = 1e-6;
pub const MAX_SCALE: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MhConfig {
    pub total_iters: usize,
    pub keep_last: usize,
    pub adapt_batch: usize,
    pub target_accept: f64,
    /// Initial proposal standard deviation multiplier; the proposal
    /// covariance is `scale² Σ`.
    pub initial_scale: f64,
    /// Full proposal correlation `Σ`; identity when absent.
    pub covariance: Option<Vec<Vec<f64>>>,
}

impl Default for MhConfig {
    fn default() -> Self {
        Self {
            total_iters: 100_000,
            keep_last: 50_000,
            adapt_batch: 100,
            target_accept: 0.40,
            initial_scale: 0.5,
            covariance: None,
        }
    }
}

impl MhConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.keep_last == 0 || self.keep_last > self.total_iters {
            return Err(Error::invalid("keep_last must be in [1, total_iters]"));
        }
        if self.adapt_batch == 0 {
            return Err(Error::invalid("adapt_batch must be positive"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::invalid("target_accept must be in (0, 1)"));
        }
        if !(self.initial_scale > 0.0 && self.initial_scale.is_finite()) {
            return Err(Error::invalid("initial_scale must be positive"));
        }
        if let Some(c) = &self.covariance {
            cholesky(c, dim)?;
        }
        Ok(())
    }

    /// Iterations during which the proposal is adapted.
    pub fn burn_in(&self) -> usize {
        self.total_iters - self.keep_last
    }
}

/// `I − (ρ/p) 11ᵀ`: negatively correlated increments, suited to latents
/// feeding a Softmax head. Positive definite for `ρ < 1`.
pub fn softmax_proposal_covariance(p: usize, rho: f64) -> Vec<Vec<f64>> {
    (0..p)
        .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 } - rho / p as f64).collect())
        .collect()
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(m: &[Vec<f64>], dim: usize) -> Result<Vec<Vec<f64>>> {
    if m.len() != dim || m.iter().any(|r| r.len() != dim) {
        return Err(Error::Shape(format!("covariance must be {dim}×{dim}")));
    }
    for i in 0..dim {
        for j in 0..i {
            if (m[i][j] - m[j][i]).abs() > 1e-12 * (1.0 + m[i][j].abs()) {
                return Err(Error::invalid("covariance must be symmetric"));
            }
        }
    }
    let mut l = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                if !(d > 1e-12 * m[i][i].abs()) {
                    return Err(Error::invalid("covariance must be positive definite"));
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// `min(1, exp(log_proposed − log_current))` for a symmetric proposal.
pub fn acceptance_probability(log_current: f64, log_proposed: f64) -> f64 {
    if log_proposed == f64::NEG_INFINITY {
        return 0.0;
    }
    if log_current == f64::NEG_INFINITY {
        return 1.0;
    }
    (log_proposed - log_current).min(0.0).exp()
}

/// `scale · exp(rate − target)`, clipped to `[MIN_SCALE, MAX_SCALE]`.
pub fn adapt_proposal(scale: f64, batch_accept_rate: f64, target: f64) -> f64 {
    (scale * (batch_accept_rate - target).exp()).clamp(MIN_SCALE, MAX_SCALE)
}

/// Normalized autocorrelation at lags `0..=max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if x.len() <= max_lag {
        return Err(Error::invalid("series must be longer than max_lag"));
    }
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    if !(c0 > 0.0) {
        return Err(Error::domain("autocorrelation of a constant series is undefined"));
    }
    Ok((0..=max_lag)
        .map(|l| {
            if l == 0 {
                return 1.0;
            }
            (0..n - l).map(|t| (x[t] - m) * (x[t + l] - m)).sum::<f64>() / c0
        })
        .collect())
}

/// Kept window and adaptation history of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    /// States of the last `keep_last` iterations.
    pub states: Vec<Vec<f64>>,
    /// Acceptance indicator of every iteration.
    pub accepted: Vec<bool>,
    /// Proposal scale after each adaptation batch.
    pub scale_history: Vec<f64>,
}

impl Chain {
    pub fn acceptance_rate(&self) -> f64 {
        rate(&self.accepted)
    }
}

fn rate(a: &[bool]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().filter(|&&b| b).count() as f64 / a.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhDiagnostics {
    pub acceptance_burn_in: f64,
    /// Acceptance over the kept window (fixed kernel).
    pub acceptance_kept: f64,
    pub final_scale: f64,
    /// Autocorrelation of the first output coordinate at lags 1, 5, 10.
    pub autocorrelation: Option<[f64; 3]>,
    /// Adaptation batches in which every proposal was rejected.
    pub all_rejected_batches: usize,
    /// Proposals reflected back into a bounded support.
    pub reflections: usize,
    pub warnings: Vec<String>,
}

/// Optional box on which the chain lives; proposals leaving it are
/// reflected at the faces, which keeps the proposal symmetric.
pub type Bounds = [(f64, f64)];

fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    let mut y = (x - lo).rem_euclid(2.0 * w);
    if y > w {
        y = 2.0 * w - y;
    }
    lo + y
}

/// Adaptive random-walk Metropolis on an arbitrary log target.
pub fn metropolis<F>(
    mut log_target: F,
    init: Vec<f64>,
    cfg: &MhConfig,
    bounds: Option<&Bounds>,
    seed: u64,
) -> Result<(Chain, MhDiagnostics)>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = init.len();
    cfg.validate(dim)?;
    let chol = cfg.covariance.as_ref().map(|c| cholesky(c, dim)).transpose()?;
    if let Some(b) = bounds {
        if b.len() != dim || b.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::invalid("bounds must be one nonempty interval per coordinate"));
        }
    }
    let mut r = rng::stream(seed, tags::MCMC, 0);
    let mut x = init;
    let mut lx = log_target(&x);
    if lx.is_nan() {
        return Err(Error::domain("log target is NaN at the initial state"));
    }
    let mut scale = cfg.initial_scale;
    let burn = cfg.burn_in();
    let mut accepted = Vec::with_capacity(cfg.total_iters);
    let mut states = Vec::with_capacity(cfg.keep_last);
    let mut scale_history = Vec::new();
    let mut all_rejected = 0;
    let mut reflections = 0;
    let mut z = vec![0.0; dim];
    let mut y = vec![0.0; dim];

    for it in 0..cfg.total_iters {
        for zi in z.iter_mut() {
            *zi = r.sample(StandardNormal);
        }
        for i in 0..dim {
            let step = match &chol {
                Some(l) => (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>(),
                None => z[i],
            };
            y[i] = x[i] + scale * step;
            if let Some(b) = bounds {
                let (lo, hi) = b[i];
                if y[i] < lo || y[i] > hi {
                    y[i] = reflect(y[i], lo, hi);
                    reflections += 1;
                }
            }
        }
        let ly = log_target(&y);
        let ly = if ly.is_nan() { f64::NEG_INFINITY } else { ly };
        let u: f64 = r.random();
        let acc = u < acceptance_probability(lx, ly);
        if acc {
            x.copy_from_slice(&y);
            lx = ly;
        }
        accepted.push(acc);
        if it >= burn {
            states.push(x.clone());
        }
        if (it + 1) % cfg.adapt_batch == 0 {
            let batch = &accepted[it + 1 - cfg.adapt_batch..=it];
            let br = rate(batch);
            if br == 0.0 {
                all_rejected += 1;
            }
            if it < burn {
                scale = adapt_proposal(scale, br, cfg.target_accept);
                scale_history.push(scale);
            }
        }
    }

    let mut warnings = Vec::new();
    if all_rejected > 0 {
        warnings.push(format!("{all_rejected} adaptation batches rejected every proposal"));
    }
    if reflections > 0 {
        warnings.push(format!("{reflections} proposals left the support and were reflected"));
    }
    let diagnostics = MhDiagnostics {
        acceptance_burn_in: rate(&accepted[..burn]),
        acceptance_kept: rate(&accepted[burn..]),
        final_scale: scale,
        autocorrelation: None,
        all_rejected_batches: all_rejected,
        reflections,
        warnings,
    };
    Ok((
        Chain {
            states,
            accepted,
            scale_history,
        },
        diagnostics,
    ))
}

/// `log p_ε(ε) + log L_N(X | g(λ, ε))`, or `−∞` where `g(λ, ε)` is outside
/// the model's parameter space.
pub fn log_target_eps(net: &PriorNetwork, model: &ModelSpec, stats: &SuffStats, eps: &[f64]) -> f64 {
    let lp = net.latent().log_density(eps);
    let theta = match net.forward(eps) {
        Ok(t) => t,
        Err(_) => return f64::NEG_INFINITY,
    };
    if model.check_theta(&theta).is_err() {
        return f64::NEG_INFINITY;
    }
    let ll = model.log_lik_stats(stats, &theta);
    if ll.is_nan() {
        f64::NEG_INFINITY
    } else {
        lp + ll
    }
}

#[derive(Debug, Clone)]
pub struct MhOutput {
    /// `g(λ, ε)` for every kept latent state.
    pub theta_samples: Vec<Vec<f64>>,
    pub chain: Chain,
    pub diagnostics: MhDiagnostics,
}

/// Number of prior draws from which the highest-target one starts the chain.
const INIT_CANDIDATES: usize = 100;

/// Sample the posterior of `θ = g(λ, ε)` given `data` by MH on `ε`.
pub fn mh_run(net: &PriorNetwork, model: &ModelSpec, data: &DataSet, cfg: &MhConfig, seed: u64) -> Result<MhOutput> {
    let stats = data.stats(model)?;
    let latent = net.latent();
    let mut init_rng = rng::stream(seed, tags::INIT, 0);
    let mut init = vec![0.0; latent.dim()];
    let mut best = log_target_eps(net, model, &stats, &init);
    for _ in 0..INIT_CANDIDATES {
        let e = latent.draw(&mut init_rng);
        let l = log_target_eps(net, model, &stats, &e);
        if l > best {
            best = l;
            init = e;
        }
    }
    let (chain, mut diagnostics) = metropolis(|e| log_target_eps(net, model, &stats, e), init, cfg, None, seed)?;
    let theta_samples = chain.states.iter().map(|e| net.forward(e)).collect::<Result<Vec<_>>>()?;
    diagnostics.autocorrelation = lag_summary(&theta_samples);
    if let DataSet::Probit(obs) = data {
        if !obs.is_empty() && probit_is_degenerate(obs) {
            diagnostics
                .warnings
                .push("degenerate probit dataset: the likelihood is flat on a region and the posterior may be improper".into());
        }
    }
    Ok(MhOutput {
        theta_samples,
        chain,
        diagnostics,
    })
}

/// Autocorrelation of the first coordinate at lags 1, 5 and 10.
pub fn lag_summary(samples: &[Vec<f64>]) -> Option<[f64; 3]> {
    let x: Vec<f64> = samples.iter().map(|s| s[0]).collect();
    autocorrelation(&x, 10).ok().map(|a| [a[1], a[5], a[10]])
}

/// Chain CSV with columns `iter, accepted, theta_1..theta_q` for the
/// kept window.
pub fn write_chain_csv(path: &Path, out: &MhOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let q = out.theta_samples.first().map_or(0, |t| t.len());
    let mut header = vec!["iter".to_string(), "accepted".to_string()];
    header.extend((1..=q).map(|j| format!("theta_{j}")));
    w.write_record(&header)?;
    let start = out.chain.accepted.len() - out.theta_samples.len();
    for (k, theta) in out.theta_samples.iter().enumerate() {
        let mut rec = vec![(start + k).to_string(), (out.chain.accepted[start + k] as u8).to_string()];
        rec.extend(theta.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptation_rule() {
        assert_eq!(adapt_proposal(0.3, 0.4, 0.4), 0.3);
        assert!((adapt_proposal(1.0, 1.0, 0.4) - 0.6f64.exp()).abs() < 1e-15);
        assert!((adapt_proposal(1.0, 0.0, 0.4) - (-0.4f64).exp()).abs() < 1e-15);
        assert_eq!(adapt_proposal(MAX_SCALE, 1.0, 0.4), MAX_SCALE);
        assert_eq!(adapt_proposal(MIN_SCALE, 0.0, 0.4), MIN_SCALE);
    }

    #[test]
    fn detailed_balance_on_three_states() {
        // Uniform proposal among the other two states is symmetric.
        let log_pi = [0.2f64.ln(), 0.3f64.ln(), 0.5f64.ln()];
        let k = |i: usize, j: usize| 0.5 * acceptance_probability(log_pi[i], log_pi[j]);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let lhs = log_pi[i].exp() * k(i, j);
                    let rhs = log_pi[j].exp() * k(j, i);
                    assert!((lhs - rhs).abs() < 1e-15);
                }
            }
        }
        // and the stationary distribution is preserved
        for j in 0..3 {
            let mut mass = 0.0;
            for i in 0..3 {
                let p_ij = if i == j {
                    1.0 - (0..3).filter(|&m| m != i).map(|m| k(i, m)).sum::<f64>()
                } else {
                    k(i, j)
                };
                mass += log_pi[i].exp() * p_ij;
            }
            assert!((mass - log_pi[j].exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn autocorrelation_basics() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin()).collect();
        let a = autocorrelation(&x, 5).unwrap();
        assert_eq!(a[0], 1.0);
        assert!(autocorrelation(&[1.0; 20], 3).is_err());
        assert!(autocorrelation(&x[..3], 3).is_err());
    }

    #[test]
    fn ar1_autocorrelation() {
        let mut r = rng::stream(5, tags::MCMC, 9);
        let n = 200_000;
        let mut x = vec![0.0; n];
        for t in 1..n {
            let z: f64 = r.sample(StandardNormal);
            x[t] = 0.5 * x[t - 1] + z;
        }
        let a = autocorrelation(&x, 4).unwrap();
        for (l, v) in a.iter().enumerate() {
            assert!((v - 0.5f64.powi(l as i32)).abs() < 3.0 / (n as f64).sqrt(), "lag {l}: {v}");
        }
    }

    #[test]
    fn cholesky_of_softmax_covariance() {
        let c = softmax_proposal_covariance(4, 0.5);
        let l = cholesky(&c, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let v: f64 = (0..4).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - c[i][j]).abs() < 1e-14);
            }
        }
        assert!(cholesky(&softmax_proposal_covariance(3, 1.0), 3).is_err());
    }

    #[test]
    fn reflection_stays_in_box() {
        for &x in &[-3.2, -1.0, 0.5, 2.0, 7.7] {
            let y = reflect(x, 0.0, 1.0);
            assert!((0.0..=1.0).contains(&y));
        }
        assert!((reflect(1.25, 0.0, 1.0) - 0.75).abs() < 1e-15);
        assert!((reflect(-0.25, 0.0, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn kept_window_length_and_frozen_scale() {
        let cfg = MhConfig {
            total_iters: 2000,
            keep_last: 700,
            ..Default::default()
        };
        let (chain, d) = metropolis(|x| -0.5 * x[0] * x[0], vec![0.0], &cfg, None, 3).unwrap();
        assert_eq!(chain.states.len(), 700);
        assert_eq!(chain.accepted.len(), 2000);
        assert_eq!(chain.scale_history.len(), 13);
        assert_eq!(d.final_scale, *chain.scale_history.last().unwrap());
    }
}
