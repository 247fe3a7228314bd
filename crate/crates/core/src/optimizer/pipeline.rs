//! Three-step construction of a constrained prior.
//!
//! 1. Fit the unconstrained prior.
//! 2. Estimate `K = ∫ J a^{1/α}` and `c = ∫ J a^{1+1/α}`.
//! 3. Fit again under `E[a(θ)] = c/K`, whose α-divergence solution is
//!    asymptotically proportional to `J(θ) a(θ)^{1/α}`.
//!
//! Step 2 can use samples of the fitted prior from step 1, or, when the
//! Jeffreys prior of the constrained component is known to be `1/θ`, an
//! importance-sampling integral in `u = log θ` (then step 1 is skipped).
//! A fitted prior is normalized while `J` is usually not, so only the
//! ratio `c/K` is comparable between the two routes.

use rand_distr::{Cauchy, Distribution};
use serde::{Deserialize, Serialize};

use crate::divergences::DivergenceSpec;
use crate::error::{Error, Result};
use crate::optimizer::lagrangian::{ConstraintFn, ConstraintSpec};
use crate::optimizer::train::{train, TrainConfig, TrainResult};
use crate::pushforward::PriorNetwork;
use crate::rng::{self, tags};
use crate::stat_models::ModelSpec;

/// Source of the constants `K` and `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ConstantSource {
    /// Moments of `a` under the unconstrained fitted prior.
    FittedPrior { samples: usize },
    /// `J(θ) ∝ 1/θ` on the constrained component; Cauchy importance
    /// sampling in `log θ`.
    LogUniformJeffreys { samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConstants {
    pub k_hat: f64,
    pub k_se: f64,
    pub c_hat: f64,
    pub c_se: f64,
    /// `ĉ/K̂`.
    pub target: f64,
    pub target_se: f64,
}

/// Largest share of the total a single Monte Carlo term may carry before
/// the integral is declared divergent.
const MAX_TERM_SHARE: f64 = 0.2;

fn summarize(k_terms: &[f64], c_terms: &[f64]) -> Result<PipelineConstants> {
    let n = k_terms.len() as f64;
    for (name, terms) in [("K", k_terms), ("c", c_terms)] {
        let sum: f64 = terms.iter().sum();
        let max = terms.iter().copied().fold(0.0, f64::max);
        if !sum.is_finite() || !(sum > 0.0) || max > MAX_TERM_SHARE * sum {
            return Err(Error::Convergence(format!(
                "Monte Carlo estimate of {name} is dominated by one draw; the integral looks divergent"
            )));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let se = |v: &[f64], m: f64| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let k_hat = mean(k_terms);
    let c_hat = mean(c_terms);
    let target = c_hat / k_hat;
    let resid: Vec<f64> = k_terms.iter().zip(c_terms).map(|(k, c)| c - target * k).collect();
    let target_se = se(&resid, mean(&resid)) / k_hat;
    Ok(PipelineConstants {
        k_hat,
        k_se: se(k_terms, k_hat),
        c_hat,
        c_se: se(c_terms, c_hat),
        target,
        target_se,
    })
}

fn check_alpha(div: &DivergenceSpec) -> Result<f64> {
    match *div {
        DivergenceSpec::Alpha { alpha, .. } => Ok(alpha),
        DivergenceSpec::Kl => Err(Error::invalid("the constrained pipeline needs an α-divergence")),
    }
}

/// `K̂ = Ê[a^{1/α}]`, `ĉ = Ê[a^{1+1/α}]` under the prior `net`.
pub fn constants_from_prior(net: &PriorNetwork, a: &ConstraintFn, alpha: f64, samples: usize, seed: u64) -> Result<PipelineConstants> {
    a.validate(net.output_dim())?;
    if samples < 100 {
        return Err(Error::invalid("need at least 100 samples"));
    }
    let thetas = net.sample_prior(samples, seed);
    let k: Vec<f64> = thetas.iter().map(|t| a.eval(t).powf(1.0 / alpha)).collect();
    let c: Vec<f64> = thetas.iter().map(|t| a.eval(t).powf(1.0 + 1.0 / alpha)).collect();
    summarize(&k, &c)
}

/// `K = ∫ a(θ)^{1/α} dθ/θ` and `c = ∫ a(θ)^{1+1/α} dθ/θ` by importance
/// sampling `u = log θ` from a standard Cauchy.
pub fn constants_log_uniform(a: &ConstraintFn, alpha: f64, samples: usize, seed: u64) -> Result<PipelineConstants> {
    if samples < 100 {
        return Err(Error::invalid("need at least 100 samples"));
    }
    if let ConstraintFn::Moment { .. } = a {
        return Err(Error::Convergence(
            "a moment constraint is not integrable against 1/θ at both ends".into(),
        ));
    }
    let cauchy = Cauchy::new(0.0, 1.0).expect("valid Cauchy");
    let mut r = rng::stream(seed, tags::REFERENCE, 0);
    let mut k = Vec::with_capacity(samples);
    let mut c = Vec::with_capacity(samples);
    for _ in 0..samples {
        let u: f64 = cauchy.sample(&mut r);
        let q = 1.0 / (std::f64::consts::PI * (1.0 + u * u));
        let av = a.eval_scalar(u.exp());
        k.push(av.powf(1.0 / alpha) / q);
        c.push(av.powf(1.0 + 1.0 / alpha) / q);
    }
    summarize(&k, &c)
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub unconstrained: Option<TrainResult>,
    pub constants: PipelineConstants,
    pub constrained: TrainResult,
}

/// Run the three steps. `unconstrained` is required for
/// [`ConstantSource::FittedPrior`] and ignored otherwise.
#[allow(clippy::too_many_arguments)]
pub fn constrained_pipeline(
    model: &ModelSpec,
    div: &DivergenceSpec,
    a: &ConstraintFn,
    source: ConstantSource,
    unconstrained: Option<(PriorNetwork, &TrainConfig)>,
    constrained: (PriorNetwork, &TrainConfig),
    seed: u64,
) -> Result<PipelineResult> {
    let alpha = check_alpha(div)?;
    a.validate(model.param_dim())?;
    let const_seed = rng::derive_seed(seed, &[tags::CONSTRAINT, u64::MAX]);
    let (first, constants) = match source {
        ConstantSource::FittedPrior { samples } => {
            let (net0, cfg0) = unconstrained
                .ok_or_else(|| Error::invalid("the fitted-prior route needs an unconstrained network"))?;
            let fit = train(net0, model, div, cfg0, None, rng::derive_seed(seed, &[1]))?;
            let constants = constants_from_prior(&fit.net, a, alpha, samples, const_seed)?;
            (Some(fit), constants)
        }
        ConstantSource::LogUniformJeffreys { samples } => {
            if model.param_dim() != 1 && a.component() >= model.param_dim() {
                return Err(Error::invalid("constraint component out of range"));
            }
            (None, constants_log_uniform(a, alpha, samples, const_seed)?)
        }
    };
    let spec = ConstraintSpec::single(a.clone(), constants.target);
    let (net1, cfg1) = constrained;
    let second = train(net1, model, div, cfg1, Some(&spec), rng::derive_seed(seed, &[2]))?;
    Ok(PipelineResult {
        unconstrained: first,
        constants,
        constrained: second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_uniform_constants_for_rational_constraint() {
        let a = ConstraintFn::Rational {
            component: 0,
            beta: -1.0,
            tau: 1.0,
        };
        let k = constants_log_uniform(&a, 0.5, 200_000, 3).unwrap();
        assert!((k.k_hat - 0.5).abs() < 4.0 * k.k_se, "{k:?}");
        let pi16 = std::f64::consts::PI / 16.0;
        assert!((k.c_hat - pi16).abs() < 4.0 * k.c_se, "{k:?}");
    }

    #[test]
    fn moment_constraint_diverges_against_log_uniform() {
        let a = ConstraintFn::Moment { component: 0, kappa: 0.5 };
        assert!(matches!(constants_log_uniform(&a, 0.5, 1000, 1), Err(Error::Convergence(_))));
    }
}
