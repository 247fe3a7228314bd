//! Jeffreys prior of the probit fragility model by quadrature, and the
//! Metropolis–Hastings reference posterior in `θ`.
//!
//! For one observation with `γ = log(a/θ₁)/θ₂`, the Fisher information is
//! `E_a[w(γ) v vᵀ]` with `w(γ) = φ(γ)²/(Φ(γ)(1 − Φ(γ)))` and
//! `v = (−1/(θ₁θ₂), −γ/θ₂)`, the expectation being over
//! `log a ~ N(μ_a, σ²_a)`. It is computed by Simpson's rule in `log a`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::posterior_mh::{lag_summary, metropolis, MhConfig, MhDiagnostics};
use crate::rng::{self, tags};
use crate::special::{log_ndtr, log_norm_pdf, ndtr, norm_pdf};
use crate::stat_models::{DataSet, ModelSpec};

pub type Matrix2 = [[f64; 2]; 2];

/// Half-width of the `γ` window, beyond which `w(γ)` is negligible.
const GAMMA_WINDOW: f64 = 12.0;
/// Half-width of the `log a` window in units of `σ_a`.
const LOG_A_WINDOW: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Simpson intervals (rounded up to even).
    pub intervals: usize,
    /// Largest relative change of `√det I` when the intervals are doubled.
    pub tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            intervals: 400,
            tolerance: 0.01,
        }
    }
}

fn probit_params(model: &ModelSpec) -> Result<(f64, f64)> {
    match *model {
        ModelSpec::Probit { mu_a, sigma2_a } => Ok((mu_a, sigma2_a.sqrt())),
        _ => Err(Error::invalid("not a probit model")),
    }
}

fn log_w(g: f64) -> f64 {
    2.0 * log_norm_pdf(g) - log_ndtr(g) - log_ndtr(-g)
}

fn simpson_fisher(mu: f64, sigma: f64, t1: f64, t2: f64, intervals: usize) -> Matrix2 {
    let lt = t1.ln();
    let lo = (mu - LOG_A_WINDOW * sigma).max(lt - GAMMA_WINDOW * t2);
    let hi = (mu + LOG_A_WINDOW * sigma).min(lt + GAMMA_WINDOW * t2);
    let mut m = [[0.0; 2]; 2];
    if !(hi > lo) {
        return m;
    }
    let n = intervals + intervals % 2;
    let h = (hi - lo) / n as f64;
    for k in 0..=n {
        let x = lo + k as f64 * h;
        let wt = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let g = (x - lt) / t2;
        let dens = (log_w(g) + log_norm_pdf((x - mu) / sigma)).exp() / sigma;
        let v = [-1.0 / (t1 * t2), -g / t2];
        let c = wt * dens;
        m[0][0] += c * v[0] * v[0];
        m[0][1] += c * v[0] * v[1];
        m[1][1] += c * v[1] * v[1];
    }
    m[0][0] *= h / 3.0;
    m[0][1] *= h / 3.0;
    m[1][1] *= h / 3.0;
    m[1][0] = m[0][1];
    m
}

pub fn det2(m: &Matrix2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherResult {
    pub matrix: Matrix2,
    /// Relative change of `√det I` between `n` and `2n` intervals.
    pub refinement_change: f64,
    pub converged: bool,
}

/// Fisher information of one probit observation at `θ`.
pub fn probit_fisher(model: &ModelSpec, theta: [f64; 2], cfg: &QuadratureConfig) -> Result<FisherResult> {
    let (mu, sigma) = probit_params(model)?;
    if !(theta[0] > 0.0 && theta[1] > 0.0) {
        return Err(Error::domain("θ must lie in the positive quadrant"));
    }
    let coarse = simpson_fisher(mu, sigma, theta[0], theta[1], cfg.intervals);
    let fine = simpson_fisher(mu, sigma, theta[0], theta[1], 2 * cfg.intervals);
    let jc = det2(&coarse).max(0.0).sqrt();
    let jf = det2(&fine).max(0.0).sqrt();
    let change = if jf > 0.0 { (jc - jf).abs() / jf } else { f64::INFINITY };
    Ok(FisherResult {
        matrix: fine,
        refinement_change: change,
        converged: change <= cfg.tolerance,
    })
}

/// Monte Carlo estimate of `E[s sᵀ]` for the score `s` of one
/// observation; returns the mean and the entrywise standard errors.
pub fn probit_fisher_mc(model: &ModelSpec, theta: [f64; 2], draws: usize, seed: u64) -> Result<(Matrix2, Matrix2)> {
    let (mu, sigma) = probit_params(model)?;
    let mut r = rng::stream(seed, tags::REFERENCE, 3);
    let mut sum = [[0.0; 2]; 2];
    let mut sq = [[0.0; 2]; 2];
    for _ in 0..draws {
        let z: f64 = r.sample(StandardNormal);
        let x = mu + sigma * z;
        let g = (x - theta[0].ln()) / theta[1];
        let p = ndtr(g);
        let fail = r.random::<f64>() < p;
        // d/dγ log P(z | γ)
        let dl = if fail {
            (log_norm_pdf(g) - log_ndtr(g)).exp()
        } else {
            -(log_norm_pdf(g) - log_ndtr(-g)).exp()
        };
        let s = [dl * (-1.0 / (theta[0] * theta[1])), dl * (-g / theta[1])];
        for i in 0..2 {
            for j in 0..2 {
                let v = s[i] * s[j];
                sum[i][j] += v;
                sq[i][j] += v * v;
            }
        }
    }
    let n = draws as f64;
    let mut mean = [[0.0; 2]; 2];
    let mut se = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            mean[i][j] = sum[i][j] / n;
            se[i][j] = ((sq[i][j] / n - mean[i][j].powi(2)).max(0.0) / (n - 1.0)).sqrt();
        }
    }
    Ok((mean, se))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_theta1: usize,
    pub n_theta2: usize,
    pub theta1_range: (f64, f64),
    pub theta2_range: (f64, f64),
    pub quadrature: QuadratureConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_theta1: 200,
            n_theta2: 200,
            theta1_range: ((-3.0f64).exp(), 3.0f64.exp()),
            theta2_range: (1e-2, 10.0),
            quadrature: QuadratureConfig::default(),
        }
    }
}

/// Unnormalized `log J` on a log-uniform grid, interpolated bilinearly in
/// `(log θ₁, log θ₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JeffreysGrid {
    pub log_theta1: Vec<f64>,
    pub log_theta2: Vec<f64>,
    /// Row-major: `log_density[i * n_theta2 + j]`.
    pub log_density: Vec<f64>,
    /// Nodes whose quadrature failed the refinement check.
    pub unconverged: usize,
    /// Nodes whose Fisher matrix was not positive definite.
    pub not_positive_definite: usize,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn probit_jeffreys_grid(model: &ModelSpec, cfg: &GridConfig, threads: usize) -> Result<JeffreysGrid> {
    probit_params(model)?;
    let (a1, b1) = cfg.theta1_range;
    let (a2, b2) = cfg.theta2_range;
    if !(a1 > 0.0 && a2 > 0.0 && b1 > a1 && b2 > a2) || cfg.n_theta1 < 2 || cfg.n_theta2 < 2 {
        return Err(Error::invalid("grid must be a nonempty box inside the positive quadrant"));
    }
    let l1 = linspace(a1.ln(), b1.ln(), cfg.n_theta1);
    let l2 = linspace(a2.ln(), b2.ln(), cfg.n_theta2);
    let node = |i: usize| -> Result<Vec<(f64, bool, bool)>> {
        l2.iter()
            .map(|&y| {
                let f = probit_fisher(model, [l1[i].exp(), y.exp()], &cfg.quadrature)?;
                let d = det2(&f.matrix);
                let pd = f.matrix[0][0] > 0.0 && d > 0.0;
                Ok((if pd { 0.5 * d.ln() } else { f64::NEG_INFINITY }, f.converged, pd))
            })
            .collect()
    };
    let rows: Vec<usize> = (0..l1.len()).collect();
    let threads = threads.max(1);
    let chunk = rows.len().div_ceil(threads);
    let results: Vec<Vec<(f64, bool, bool)>> = std::thread::scope(|s| {
        let handles: Vec<_> = rows
            .chunks(chunk)
            .map(|c| {
                let node = &node;
                s.spawn(move || c.iter().map(|&i| node(i)).collect::<Result<Vec<_>>>())
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("grid worker"))
            .collect::<Result<Vec<_>>>()
            .map(|v| v.into_iter().flatten().collect())
    })?;
    let mut log_density = Vec::with_capacity(l1.len() * l2.len());
    let mut unconverged = 0;
    let mut npd = 0;
    for row in results {
        for (v, conv, pd) in row {
            log_density.push(v);
            unconverged += (!conv) as usize;
            npd += (!pd) as usize;
        }
    }
    Ok(JeffreysGrid {
        log_theta1: l1,
        log_theta2: l2,
        log_density,
        unconverged,
        not_positive_definite: npd,
    })
}

impl JeffreysGrid {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.log_density[i * self.log_theta2.len() + j]
    }

    /// Box `[(log θ₁ range), (log θ₂ range)]`.
    pub fn log_bounds(&self) -> [(f64, f64); 2] {
        [
            (self.log_theta1[0], *self.log_theta1.last().unwrap()),
            (self.log_theta2[0], *self.log_theta2.last().unwrap()),
        ]
    }

    /// Interpolated `log J(θ)`; `−∞` outside the grid.
    pub fn log_density_at(&self, theta: &[f64]) -> f64 {
        if theta.len() != 2 || !(theta[0] > 0.0 && theta[1] > 0.0) {
            return f64::NEG_INFINITY;
        }
        let (x, y) = (theta[0].ln(), theta[1].ln());
        let locate = |g: &[f64], v: f64| -> Option<(usize, f64)> {
            let (lo, hi) = (g[0], *g.last().unwrap());
            if !(v >= lo && v <= hi) {
                return None;
            }
            let step = (hi - lo) / (g.len() - 1) as f64;
            let k = (((v - lo) / step) as usize).min(g.len() - 2);
            Some((k, ((v - g[k]) / step).clamp(0.0, 1.0)))
        };
        let (Some((i, s)), Some((j, t))) = (locate(&self.log_theta1, x), locate(&self.log_theta2, y)) else {
            return f64::NEG_INFINITY;
        };
        (1.0 - s) * (1.0 - t) * self.at(i, j)
            + s * (1.0 - t) * self.at(i + 1, j)
            + (1.0 - s) * t * self.at(i, j + 1)
            + s * t * self.at(i + 1, j + 1)
    }

    /// Slope of `log J` against `log θ₂` between the two lowest (`upper =
    /// false`) or two highest grid lines, at row `i` of `θ₁`.
    pub fn theta2_edge_slope(&self, i: usize, upper: bool) -> f64 {
        let n = self.log_theta2.len();
        let (a, b) = if upper { (n - 2, n - 1) } else { (0, 1) };
        (self.at(i, b) - self.at(i, a)) / (self.log_theta2[b] - self.log_theta2[a])
    }

    /// CSV with columns `theta1, theta2, log_density`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["theta1", "theta2", "log_density"])?;
        for (i, x) in self.log_theta1.iter().enumerate() {
            for (j, y) in self.log_theta2.iter().enumerate() {
                w.write_record([x.exp().to_string(), y.exp().to_string(), self.at(i, j).to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ThetaChain {
    pub theta_samples: Vec<Vec<f64>>,
    pub diagnostics: MhDiagnostics,
}

/// MH in `log θ` targeting `π(θ) L_N(X | θ)` for a prior given by its
/// log-density in `θ`. Proposals leaving `log_bounds` are reflected.
pub fn mh_theta_with_prior<F>(
    log_prior: F,
    log_bounds: Option<&[(f64, f64)]>,
    model: &ModelSpec,
    data: &DataSet,
    init_theta: &[f64],
    cfg: &MhConfig,
    seed: u64,
) -> Result<ThetaChain>
where
    F: Fn(&[f64]) -> f64,
{
    let stats = data.stats(model)?;
    let mut theta = vec![0.0; init_theta.len()];
    let target = |u: &[f64]| -> f64 {
        let t: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        if model.check_theta(&t).is_err() {
            return f64::NEG_INFINITY;
        }
        let lp = log_prior(&t);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + model.log_lik_stats(&stats, &t) + u.iter().sum::<f64>()
    };
    let init: Vec<f64> = init_theta.iter().map(|t| t.ln()).collect();
    let (chain, mut diagnostics) = metropolis(target, init, cfg, log_bounds, seed)?;
    let samples: Vec<Vec<f64>> = chain
        .states
        .iter()
        .map(|u| {
            for (t, v) in theta.iter_mut().zip(u) {
                *t = v.exp();
            }
            theta.clone()
        })
        .collect();
    diagnostics.autocorrelation = lag_summary(&samples);
    Ok(ThetaChain {
        theta_samples: samples,
        diagnostics,
    })
}

/// Reference posterior for the probit model under the tabulated Jeffreys
/// prior. The chain starts at the grid node of highest posterior density.
pub fn mh_theta_reference(grid: &JeffreysGrid, model: &ModelSpec, data: &DataSet, cfg: &MhConfig, seed: u64) -> Result<ThetaChain> {
    let stats = data.stats(model)?;
    let mut best = (f64::NEG_INFINITY, vec![1.0, 1.0]);
    for x in grid.log_theta1.iter().step_by(5) {
        for y in grid.log_theta2.iter().step_by(5) {
            let t = vec![x.exp(), y.exp()];
            let v = grid.log_density_at(&t) + model.log_lik_stats(&stats, &t);
            if v > best.0 {
                best = (v, t);
            }
        }
    }
    let bounds = grid.log_bounds();
    mh_theta_with_prior(|t| grid.log_density_at(t), Some(&bounds), model, data, &best.1, cfg, seed)
}

/// `w(γ)` evaluated directly; loses accuracy in the tails.
pub fn gaussian_weight(g: f64) -> f64 {
    norm_pdf(g).powi(2) / (ndtr(g) * ndtr(-g))
}
