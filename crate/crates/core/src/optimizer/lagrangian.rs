//! Linear moment constraints `E_{π_λ}[a_k(θ)] = b_k` handled with an
//! augmented Lagrangian.
//!
//! The ascent direction for `λ` is the objective gradient plus
//! `E_ε[Σ_k (η_k − η̃_k C_k) ∇a_k(θ) · ∂g/∂λ]`, where
//! `C_k = E[a_k(θ)] − b_k`. Every `period` epochs the multipliers move to
//! `η ← η − η̃·C`, and the penalties are doubled while `‖C‖_∞ > M` and
//! halved otherwise, capped at `η̃_max`.

use serde::{Deserialize, Serialize};

use crate::divergences::DivergenceSpec;
use crate::error::{Error, Result};
use crate::objectives::{self, EstimatorConfig, GradEstimate};
use crate::pushforward::PriorNetwork;
use crate::rng::{derive_seed, tags};
use crate::stat_models::ModelSpec;

/// A positive function of one component of θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ConstraintFn {
    /// `θ_c^κ`.
    Moment {
        #[serde(default)]
        component: usize,
        kappa: f64,
    },
    /// `1 / (θ_c^β + θ_c^τ)` with `β < 0 < τ`.
    Rational {
        #[serde(default)]
        component: usize,
        beta: f64,
        tau: f64,
    },
    /// Piecewise-linear interpolation of `(x, a)` knots, constant outside.
    Tabulated {
        #[serde(default)]
        component: usize,
        xs: Vec<f64>,
        values: Vec<f64>,
    },
}

impl ConstraintFn {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.component() >= dim {
            return Err(Error::invalid(format!(
                "constraint component {} out of range for θ of dimension {dim}",
                self.component()
            )));
        }
        match self {
            ConstraintFn::Moment { kappa, .. } => {
                if !kappa.is_finite() {
                    return Err(Error::invalid("moment exponent must be finite"));
                }
            }
            ConstraintFn::Rational { beta, tau, .. } => {
                if !(*beta < 0.0 && *tau > 0.0) {
                    return Err(Error::invalid("rational constraint needs β < 0 < τ"));
                }
            }
            ConstraintFn::Tabulated { xs, values, .. } => {
                if xs.len() < 2 || xs.len() != values.len() {
                    return Err(Error::invalid("tabulated constraint needs >= 2 matching knots"));
                }
                if xs.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid("tabulated knots must be strictly increasing"));
                }
                if values.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::invalid("tabulated constraint values must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn component(&self) -> usize {
        match self {
            ConstraintFn::Moment { component, .. }
            | ConstraintFn::Rational { component, .. }
            | ConstraintFn::Tabulated { component, .. } => *component,
        }
    }

    /// `a(θ)` as a function of the constrained component only.
    pub fn eval_scalar(&self, x: f64) -> f64 {
        match self {
            ConstraintFn::Moment { kappa, .. } => x.powf(*kappa),
            ConstraintFn::Rational { beta, tau, .. } => 1.0 / (x.powf(*beta) + x.powf(*tau)),
            ConstraintFn::Tabulated { xs, values, .. } => {
                let (i, w) = locate(xs, x);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    /// `da/dx` for the constrained component.
    pub fn deriv_scalar(&self, x: f64) -> f64 {
        match self {
            ConstraintFn::Moment { kappa, .. } => kappa * x.powf(kappa - 1.0),
            ConstraintFn::Rational { beta, tau, .. } => {
                let d = x.powf(*beta) + x.powf(*tau);
                -(beta * x.powf(beta - 1.0) + tau * x.powf(tau - 1.0)) / (d * d)
            }
            ConstraintFn::Tabulated { xs, values, .. } => {
                if x <= xs[0] || x >= xs[xs.len() - 1] {
                    0.0
                } else {
                    let (i, _) = locate(xs, x);
                    (values[i + 1] - values[i]) / (xs[i + 1] - xs[i])
                }
            }
        }
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        self.eval_scalar(theta[self.component()])
    }
}

/// Knot interval and interpolation weight for `x`, clamped to the ends.
fn locate(xs: &[f64], x: f64) -> (usize, f64) {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return (0, 0.0);
    }
    if x >= xs[last] {
        return (last - 1, 1.0);
    }
    let i = xs.partition_point(|&k| k <= x) - 1;
    (i, (x - xs[i]) / (xs[i + 1] - xs[i]))
}

/// One constraint `E[a(θ)] = target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraint {
    pub function: ConstraintFn,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstraintSpec {
    pub constraints: Vec<Constraint>,
}

impl ConstraintSpec {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        Self { constraints }
    }

    pub fn single(function: ConstraintFn, target: f64) -> Self {
        Self::new(vec![Constraint { function, target }])
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for c in &self.constraints {
            c.function.validate(dim)?;
            if !c.target.is_finite() {
                return Err(Error::invalid("constraint target must be finite"));
            }
        }
        Ok(())
    }

    /// `C_k = mean_i a_k(θ_i) − b_k` over the given draws.
    pub fn gaps(&self, thetas: &[Vec<f64>]) -> Vec<f64> {
        let n = thetas.len() as f64;
        self.constraints
            .iter()
            .map(|c| thetas.iter().map(|t| c.function.eval(t)).sum::<f64>() / n - c.target)
            .collect()
    }
}

/// Monte Carlo constraint values with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintEstimate {
    /// `C_k = Ê[a_k(θ)] − b_k`.
    pub gaps: Vec<f64>,
    pub std_errors: Vec<f64>,
}

impl ConstraintEstimate {
    pub fn max_abs_gap(&self) -> f64 {
        self.gaps.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Estimate `C_k` from `n_samples` prior draws.
pub fn estimate_constraint(net: &PriorNetwork, spec: &ConstraintSpec, n_samples: usize, seed: u64) -> Result<ConstraintEstimate> {
    if n_samples < 100 {
        return Err(Error::invalid("constraint estimate needs at least 100 samples"));
    }
    spec.validate(net.output_dim())?;
    let thetas = net.sample_prior(n_samples, seed);
    let n = n_samples as f64;
    let mut gaps = Vec::with_capacity(spec.len());
    let mut std_errors = Vec::with_capacity(spec.len());
    for c in &spec.constraints {
        let vals: Vec<f64> = thetas.iter().map(|t| c.function.eval(t)).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        gaps.push(mean - c.target);
        std_errors.push((var / n).sqrt());
    }
    Ok(ConstraintEstimate { gaps, std_errors })
}

/// Adaptation constants of the penalty schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LagrangianConfig {
    /// Penalty growth/shrink factor `v`.
    pub factor: f64,
    /// Threshold `M` on `‖C‖_∞`.
    pub threshold: f64,
    pub eta_tilde_max: f64,
    /// Floor applied when halving; 0 halves without bound.
    pub eta_tilde_min: f64,
    pub eta_tilde_init: f64,
    /// Epochs between multiplier updates.
    pub period: usize,
    /// Prior draws for the constraint estimate used at each update.
    pub update_samples: usize,
    /// Independent prior draws for the constraint value inside each
    /// gradient step; 0 reuses the gradient's outer draws.
    pub gap_samples: usize,
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        Self {
            factor: 2.0,
            threshold: 0.005,
            eta_tilde_max: 1e4,
            eta_tilde_min: 0.0,
            eta_tilde_init: 1.0,
            period: 100,
            update_samples: 10_000,
            gap_samples: 1000,
        }
    }
}

impl LagrangianConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.factor > 1.0) {
            return Err(Error::invalid("penalty factor must exceed 1"));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::invalid("constraint threshold must be positive"));
        }
        if !(self.eta_tilde_init > 0.0 && self.eta_tilde_init <= self.eta_tilde_max) {
            return Err(Error::invalid("need 0 < initial penalty <= eta_tilde_max"));
        }
        if !(self.eta_tilde_min >= 0.0 && self.eta_tilde_min <= self.eta_tilde_init) {
            return Err(Error::invalid("need 0 <= eta_tilde_min <= eta_tilde_init"));
        }
        if self.period == 0 {
            return Err(Error::invalid("multiplier update period must be >= 1"));
        }
        if self.update_samples < 100 {
            return Err(Error::invalid("update_samples must be >= 100"));
        }
        if self.gap_samples == 1 {
            return Err(Error::invalid("gap_samples must be 0 or >= 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianState {
    pub eta: Vec<f64>,
    pub eta_tilde: Vec<f64>,
    pub config: LagrangianConfig,
}

impl LagrangianState {
    pub fn new(k: usize, config: LagrangianConfig) -> Self {
        Self {
            eta: vec![0.0; k],
            eta_tilde: vec![config.eta_tilde_init; k],
            config,
        }
    }

    /// `η ← η − η̃·C`, then adapt `η̃` on `‖C‖_∞`.
    pub fn update_multipliers(&mut self, gaps: &[f64]) {
        for ((e, et), c) in self.eta.iter_mut().zip(&self.eta_tilde).zip(gaps) {
            *e -= et * c;
        }
        let worst = gaps.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let cfg = self.config;
        for et in &mut self.eta_tilde {
            *et = if worst > cfg.threshold {
                (*et * cfg.factor).min(cfg.eta_tilde_max)
            } else {
                (*et / cfg.factor).max(cfg.eta_tilde_min)
            };
        }
    }

    /// θ-space penalty direction `Σ_k (η_k − η̃_k C_k) ∇a_k(θ)`.
    pub fn penalty_direction(&self, spec: &ConstraintSpec, gaps: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; theta.len()];
        for (k, c) in spec.constraints.iter().enumerate() {
            let coef = self.eta[k] - self.eta_tilde[k] * gaps[k];
            let j = c.function.component();
            out[j] += coef * c.function.deriv_scalar(theta[j]);
        }
        out
    }
}

/// Gradient of the augmented Lagrangian. The constraint values entering the
/// penalty come from `gap_samples` independent prior draws, or from the
/// gradient's own outer draws when that is 0; they are returned alongside.
pub fn lagrangian_gradient(
    net: &PriorNetwork,
    model: &ModelSpec,
    div: &DivergenceSpec,
    cfg: &EstimatorConfig,
    spec: &ConstraintSpec,
    lag: &LagrangianState,
    seed: u64,
) -> Result<(GradEstimate, Vec<f64>)> {
    spec.validate(net.output_dim())?;
    if spec.is_empty() {
        return Ok((objectives::gradient(net, model, div, cfg, seed)?, Vec::new()));
    }
    if lag.eta.len() != spec.len() {
        return Err(Error::Shape("multiplier count does not match constraints".into()));
    }
    let fixed = match lag.config.gap_samples {
        0 => None,
        n => Some(estimate_constraint(net, spec, n, derive_seed(seed, &[tags::CONSTRAINT]))?.gaps),
    };
    let gaps = std::sync::Mutex::new(Vec::new());
    let extra = |thetas: &[Vec<f64>]| {
        let c = fixed.clone().unwrap_or_else(|| spec.gaps(thetas));
        let dirs = thetas.iter().map(|t| lag.penalty_direction(spec, &c, t)).collect();
        *gaps.lock().expect("gap lock") = c;
        dirs
    };
    let g = objectives::gradient_with(net, model, div, cfg, seed, true, Some(&extra))?;
    Ok((g, gaps.into_inner().expect("gap lock")))
}
