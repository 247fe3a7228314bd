//! Stochastic gradient ascent of the objective, optionally constrained.

use serde::{Deserialize, Serialize};

use crate::divergences::DivergenceSpec;
use crate::error::{Error, Result};
use crate::objectives::{self, EstimatorConfig};
use crate::optimizer::adam::{AdamConfig, AdamState};
use crate::optimizer::lagrangian::{
    estimate_constraint, lagrangian_gradient, ConstraintSpec, LagrangianConfig, LagrangianState,
};
use crate::pushforward::PriorNetwork;
use crate::rng::{derive_seed, tags};
use crate::stat_models::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub adam: AdamConfig,
    pub estimator: EstimatorConfig,
    /// Record an MI estimate every this many epochs (0 disables).
    pub monitor_every: usize,
    pub lagrangian: LagrangianConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            adam: AdamConfig::default(),
            estimator: EstimatorConfig::default(),
            monitor_every: 1,
            lagrangian: LagrangianConfig::default(),
        }
    }
}

/// One row of the training trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub mi_mean: f64,
    pub mi_lo95: f64,
    pub mi_hi95: f64,
    pub mi_se: f64,
    /// `‖C‖_∞` on the epoch's outer draws, for constrained runs.
    pub constraint_gap: Option<f64>,
}

/// Constraint state at a multiplier update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierRow {
    pub epoch: usize,
    pub gaps: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_tilde: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub net: PriorNetwork,
    pub trace: Vec<TraceRow>,
    pub multiplier_trace: Vec<MultiplierRow>,
    pub lagrangian: Option<LagrangianState>,
    pub clamped: usize,
}

impl TrainResult {
    /// `‖C‖_∞` at the last multiplier update.
    pub fn final_update_gap(&self) -> Option<f64> {
        self.multiplier_trace
            .last()
            .map(|r| r.gaps.iter().fold(0.0, |m: f64, g| m.max(g.abs())))
    }
}

/// Fit `net` by Adam ascent.
///
/// With a non-empty `constraints`, the augmented-Lagrangian gradient is
/// used and the multipliers are updated every `lagrangian.period` epochs
/// (and once more after the last epoch) from a fresh prior sample.
pub fn train(
    mut net: PriorNetwork,
    model: &ModelSpec,
    div: &DivergenceSpec,
    cfg: &TrainConfig,
    constraints: Option<&ConstraintSpec>,
    seed: u64,
) -> Result<TrainResult> {
    cfg.adam.validate()?;
    cfg.estimator.validate()?;
    let constraints = constraints.filter(|c| !c.is_empty());
    let mut lag = match constraints {
        Some(c) => {
            cfg.lagrangian.validate()?;
            c.validate(net.output_dim())?;
            Some(LagrangianState::new(c.len(), cfg.lagrangian))
        }
        None => None,
    };
    let mut adam = AdamState::new(cfg.adam, net.num_params());
    let mut trace = Vec::new();
    let mut multiplier_trace = Vec::new();
    let mut clamped = 0;
    let mut params = net.params().to_vec();

    for epoch in 0..cfg.epochs {
        let epoch_seed = derive_seed(seed, &[tags::EPOCH, epoch as u64]);
        let (grad, gap) = match (constraints, &lag) {
            (Some(c), Some(l)) => {
                let (g, gaps) = lagrangian_gradient(&net, model, div, &cfg.estimator, c, l, epoch_seed)?;
                let worst = gaps.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                (g, Some(worst))
            }
            _ => (objectives::gradient(&net, model, div, &cfg.estimator, epoch_seed)?, None),
        };
        clamped += grad.clamped;

        if cfg.monitor_every > 0 && epoch % cfg.monitor_every == 0 {
            trace.push(monitor_row(&net, model, div, cfg, seed, epoch, gap)?);
        }

        adam.step(&grad.grad, &mut params, epoch).map_err(|e| with_dump(e, &net))?;
        net.set_params(&params)?;
        params.copy_from_slice(net.params());

        if let (Some(c), Some(l)) = (constraints, lag.as_mut()) {
            if (epoch + 1) % l.config.period == 0 || epoch + 1 == cfg.epochs {
                let s = derive_seed(seed, &[tags::CONSTRAINT, epoch as u64]);
                let est = estimate_constraint(&net, c, l.config.update_samples, s)?;
                l.update_multipliers(&est.gaps);
                multiplier_trace.push(MultiplierRow {
                    epoch: epoch + 1,
                    gaps: est.gaps,
                    eta: l.eta.clone(),
                    eta_tilde: l.eta_tilde.clone(),
                });
            }
        }
    }
    if cfg.monitor_every > 0 {
        trace.push(monitor_row(&net, model, div, cfg, seed, cfg.epochs, None)?);
    }
    Ok(TrainResult {
        net,
        trace,
        multiplier_trace,
        lagrangian: lag,
        clamped,
    })
}

fn monitor_row(
    net: &PriorNetwork,
    model: &ModelSpec,
    div: &DivergenceSpec,
    cfg: &TrainConfig,
    seed: u64,
    epoch: usize,
    gap: Option<f64>,
) -> Result<TraceRow> {
    let s = derive_seed(seed, &[tags::MONITOR, epoch as u64]);
    let mi = objectives::estimate_mi(net, model, div, &cfg.estimator, s)?;
    if !mi.value.is_finite() {
        return Err(Error::NonFinite {
            epoch,
            what: "mutual information estimate".into(),
            state_dump: net.to_json(),
        });
    }
    let (lo, hi) = mi.band95();
    Ok(TraceRow {
        epoch,
        mi_mean: mi.value,
        mi_lo95: lo,
        mi_hi95: hi,
        mi_se: mi.std_error,
        constraint_gap: gap,
    })
}

fn with_dump(e: Error, net: &PriorNetwork) -> Error {
    match e {
        Error::NonFinite { epoch, what, .. } => Error::NonFinite {
            epoch,
            what,
            state_dump: net.to_json(),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pushforward::{Activation, Architecture, OutputHead};

    #[test]
    fn zero_learning_rate_leaves_net_unchanged() {
        let net = PriorNetwork::from_params(
            Architecture::SingleLayer,
            OutputHead::Componentwise(vec![Activation::Sigmoid]),
            1,
            1,
            0.0,
            vec![0.0, 0.2],
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            adam: AdamConfig::with_lr(0.0),
            estimator: EstimatorConfig {
                n_data: 3,
                t: 5,
                u: 5,
                n_outer: 10,
                ..Default::default()
            },
            ..Default::default()
        };
        let res = train(net.clone(), &ModelSpec::Bernoulli, &DivergenceSpec::Kl, &cfg, None, 1).unwrap();
        assert_eq!(res.net, net);
        assert_eq!(res.trace.len(), 6);
        assert!(res.trace.iter().all(|r| r.mi_mean.abs() < 1e-12));
        assert!(res.lagrangian.is_none());
    }
}
