//! Monte Carlo estimators of the generalized mutual information, of the
//! MLE-ratio lower bound, and of their gradients with respect to `λ`.
//!
//! One gradient evaluation draws `T` outer latents `ε_t` (θ_t = g(λ, ε_t))
//! and, for each, `U` datasets `X ~ L_N(·|θ_t)`. The marginal likelihood
//! `p_λ(X)` is estimated with a separate batch of `T` latents. When
//! `common_random_numbers` is set, a single marginal batch is shared by
//! every outer draw; otherwise each outer draw gets its own batch.
//!
//! For the full mutual information the gradient has two parts:
//!
//! * the score-weighted term `F_j = E_X[∂_j log L(X|θ) · F(p/L(X|θ))]`,
//!   pulled back through the Jacobian at `ε_t`;
//! * the term coming from the dependence of `p_λ` on `λ`, estimated on the
//!   marginal batch. With `π_s` the normalized likelihood weights of the
//!   batch members and `r = p̂/L_t`, member `s` receives
//!   `f′(r)·r·π_s·∂ log L(X|θ'_s)/(T·U)`, pulled back at `ε'_s`.
//!
//! For KL the second part has zero expectation and is skipped.
//!
//! All ratios are formed in the log domain. Log-ratios are clamped to
//! `[−700, 700]` and every clamp is counted.

use serde::{Deserialize, Serialize};

use crate::divergences::{clamp_log_ratio, DivergenceSpec};
use crate::error::{Error, Result};
use crate::pushforward::{ForwardPass, PriorNetwork};
use crate::rng::{self, tags};
use crate::special::log_sum_exp;
use crate::stat_models::{DataSet, ModelSpec, PreparedTheta, SuffStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    FullMi,
    LowerBound,
}

/// Where `L_N(X|θ̂)` comes from in the lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MleSource {
    /// Largest likelihood over the marginal batch and the outer draw.
    Proxy,
    /// The model's closed-form MLE, falling back to the proxy when the
    /// model has none.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Observations per simulated dataset.
    pub n_data: usize,
    /// Latent draws per batch (outer and marginal).
    pub t: usize,
    /// Datasets per outer draw.
    pub u: usize,
    /// Outer draws for mutual-information monitoring.
    pub n_outer: usize,
    pub objective: Objective,
    pub mle_source: MleSource,
    pub common_random_numbers: bool,
    /// Worker threads for the outer loop. Results do not depend on it.
    pub threads: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            n_data: 10,
            t: 50,
            u: 1000,
            n_outer: 200,
            objective: Objective::LowerBound,
            mle_source: MleSource::Proxy,
            common_random_numbers: true,
            threads: 1,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t < 2 {
            return Err(Error::invalid("estimator needs T >= 2"));
        }
        if self.u < 1 {
            return Err(Error::invalid("estimator needs U >= 1"));
        }
        if self.n_data < 1 {
            return Err(Error::invalid("estimator needs N >= 1"));
        }
        if self.n_outer < 2 {
            return Err(Error::invalid("MI monitoring needs n_outer >= 2"));
        }
        if self.threads < 1 {
            return Err(Error::invalid("threads must be >= 1"));
        }
        Ok(())
    }
}

/// Stochastic gradient of an objective with respect to `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradEstimate {
    pub grad: Vec<f64>,
    /// Number of log-ratios that hit the clamp.
    pub clamped: usize,
    /// Plug-in estimate of the objective on the same draws.
    pub value: f64,
    /// Outer prior draws θ_t used by the estimate.
    pub outer_thetas: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    pub value: f64,
    pub std_error: f64,
    pub clamped: usize,
}

impl MiEstimate {
    /// Normal 95% band.
    pub fn band95(&self) -> (f64, f64) {
        (self.value - 1.96 * self.std_error, self.value + 1.96 * self.std_error)
    }
}

/// Additional θ-space gradient contributions for the outer draws, given
/// all outer θ_t. Used by the constrained objective.
pub type ExtraTerm<'a> = dyn Fn(&[Vec<f64>]) -> Vec<Vec<f64>> + Sync + 'a;

struct Member {
    eps: Vec<f64>,
    pass: ForwardPass,
    prep: PreparedTheta,
}

fn check_compat(net: &PriorNetwork, model: &ModelSpec) -> Result<()> {
    model.validate()?;
    if net.output_dim() != model.param_dim() {
        return Err(Error::Shape(format!(
            "network outputs {} values, {} model needs {}",
            net.output_dim(),
            model.name(),
            model.param_dim()
        )));
    }
    Ok(())
}

fn member(net: &PriorNetwork, model: &ModelSpec, eps: Vec<f64>) -> Result<Member> {
    let pass = net.forward_pass(&eps);
    model.check_theta(&pass.theta)?;
    let prep = PreparedTheta::new(&pass.theta);
    Ok(Member { eps, pass, prep })
}

fn outer_member(net: &PriorNetwork, model: &ModelSpec, seed: u64, t: usize) -> Result<Member> {
    let mut r = rng::stream(seed, tags::LATENT, t as u64);
    member(net, model, net.latent().draw(&mut r))
}

fn marginal_batch(net: &PriorNetwork, model: &ModelSpec, seed: u64, batch: usize, size: usize) -> Result<Vec<Member>> {
    let mut r = rng::stream(seed, tags::MARGINAL, batch as u64);
    (0..size)
        .map(|_| member(net, model, net.latent().draw(&mut r)))
        .collect()
}

fn log_liks(model: &ModelSpec, stats: &SuffStats, batch: &[Member], out: &mut Vec<f64>) {
    out.clear();
    out.extend(batch.iter().map(|m| model.log_lik_prepared(stats, &m.prep)));
}

/// `log p̂_λ(X)` from sufficient statistics: log-mean-exp of the
/// log-likelihood over `T` latent draws.
pub fn log_estimate_marginal(net: &PriorNetwork, model: &ModelSpec, stats: &SuffStats, t: usize, seed: u64) -> Result<f64> {
    check_compat(net, model)?;
    if t < 1 {
        return Err(Error::invalid("marginal estimate needs T >= 1"));
    }
    let batch = marginal_batch(net, model, seed, 0, t)?;
    let mut ll = Vec::new();
    log_liks(model, stats, &batch, &mut ll);
    Ok(log_sum_exp(&ll) - (t as f64).ln())
}

/// `p̂_λ(X) = (1/T) Σ_t L_N(X|g(λ, ε_t))`.
pub fn estimate_marginal(net: &PriorNetwork, model: &ModelSpec, data: &DataSet, t: usize, seed: u64) -> Result<f64> {
    let stats = data.stats(model)?;
    Ok(log_estimate_marginal(net, model, &stats, t, seed)?.exp())
}

/// `log max_t L_N(X|g(λ, ε_t))` over the same draws as the marginal.
pub fn log_mle_proxy(net: &PriorNetwork, model: &ModelSpec, stats: &SuffStats, t: usize, seed: u64) -> Result<f64> {
    check_compat(net, model)?;
    if t < 1 {
        return Err(Error::invalid("MLE proxy needs T >= 1"));
    }
    let batch = marginal_batch(net, model, seed, 0, t)?;
    let mut ll = Vec::new();
    log_liks(model, stats, &batch, &mut ll);
    Ok(ll.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Sample-based stand-in for `L_N(X|θ̂_MLE)`.
pub fn mle_proxy(net: &PriorNetwork, model: &ModelSpec, data: &DataSet, t: usize, seed: u64) -> Result<f64> {
    let stats = data.stats(model)?;
    Ok(log_mle_proxy(net, model, &stats, t, seed)?.exp())
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// `I_Df(π_λ)`: mean of `f(p̂(X)/L(X|θ))` over `n_outer` pairs
/// `θ ~ π_λ`, `X ~ L_N(·|θ)`.
pub fn estimate_mi(net: &PriorNetwork, model: &ModelSpec, div: &DivergenceSpec, cfg: &EstimatorConfig, seed: u64) -> Result<MiEstimate> {
    monitor(net, model, div, cfg, seed, Objective::FullMi)
}

/// `B_Df(π_λ)`: as [`estimate_mi`] with `L(X|θ̂)` in place of `p̂(X)`.
pub fn estimate_lower_bound(net: &PriorNetwork, model: &ModelSpec, div: &DivergenceSpec, cfg: &EstimatorConfig, seed: u64) -> Result<MiEstimate> {
    monitor(net, model, div, cfg, seed, Objective::LowerBound)
}

fn monitor(
    net: &PriorNetwork,
    model: &ModelSpec,
    div: &DivergenceSpec,
    cfg: &EstimatorConfig,
    seed: u64,
    objective: Objective,
) -> Result<MiEstimate> {
    cfg.validate()?;
    div.validate()?;
    check_compat(net, model)?;
    let shared = if cfg.common_random_numbers {
        Some(marginal_batch(net, model, seed, 0, cfg.t)?)
    } else {
        None
    };
    let mut values = Vec::with_capacity(cfg.n_outer);
    let mut clamped = 0;
    let mut ll = Vec::new();
    for i in 0..cfg.n_outer {
        let outer = outer_member(net, model, seed, i)?;
        let own;
        let batch = match &shared {
            Some(b) => b,
            None => {
                own = marginal_batch(net, model, seed, i + 1, cfg.t)?;
                &own
            }
        };
        let mut r = rng::stream(seed, tags::DATA, i as u64);
        let stats = model.sample_stats(&outer.prep.theta, cfg.n_data, &mut r);
        let lt = model.log_lik_prepared(&stats, &outer.prep);
        log_liks(model, &stats, batch, &mut ll);
        let log_num = match objective {
            Objective::FullMi => log_sum_exp(&ll) - (cfg.t as f64).ln(),
            Objective::LowerBound => log_mle(model, &stats, cfg.mle_source, &ll, lt),
        };
        let (v, c) = div.f_of_log(log_num - lt);
        clamped += c as usize;
        values.push(v);
    }
    let (value, std_error) = mean_se(&values);
    Ok(MiEstimate {
        value,
        std_error,
        clamped,
    })
}

fn log_mle(model: &ModelSpec, stats: &SuffStats, source: MleSource, batch_ll: &[f64], lt: f64) -> f64 {
    if source == MleSource::Exact {
        if let Some(mle) = model.mle_stats(stats) {
            return model.log_lik_stats(stats, &mle);
        }
    }
    batch_ll.iter().copied().fold(lt, f64::max)
}

/// Gradient of the objective selected by `cfg.objective`.
pub fn gradient(net: &PriorNetwork, model: &ModelSpec, div: &DivergenceSpec, cfg: &EstimatorConfig, seed: u64) -> Result<GradEstimate> {
    gradient_with(net, model, div, cfg, seed, true, None)
}

/// Gradient of the full mutual information.
pub fn grad_full_mi(net: &PriorNetwork, model: &ModelSpec, div: &DivergenceSpec, cfg: &EstimatorConfig, seed: u64) -> Result<GradEstimate> {
    let cfg = EstimatorConfig {
        objective: Objective::FullMi,
        ..*cfg
    };
    gradient_with(net, model, div, &cfg, seed, true, None)
}

/// Full-MI gradient with only the score-weighted `F_j` term.
pub fn grad_full_mi_first_term(
    net: &PriorNetwork,
    model: &ModelSpec,
    div: &DivergenceSpec,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<GradEstimate> {
    let cfg = EstimatorConfig {
        objective: Objective::FullMi,
        ..*cfg
    };
    gradient_with(net, model, div, &cfg, seed, false, None)
}

/// Gradient of the lower bound `B_Df`. Requires a decreasing generator
/// (KL or stabilized α).
pub fn grad_lower_bound(net: &PriorNetwork, model: &ModelSpec, div: &DivergenceSpec, cfg: &EstimatorConfig, seed: u64) -> Result<GradEstimate> {
    let cfg = EstimatorConfig {
        objective: Objective::LowerBound,
        ..*cfg
    };
    gradient_with(net, model, div, &cfg, seed, true, None)
}

#[derive(Default)]
struct OuterResult {
    /// θ-space weight pulled back at ε_t (already divided by U).
    a: Vec<f64>,
    /// Per marginal member, flattened `T × q`.
    w: Vec<f64>,
    value: f64,
    clamped: usize,
}

#[allow(clippy::too_many_arguments)]
fn outer_term(
    model: &ModelSpec,
    div: &DivergenceSpec,
    cfg: &EstimatorConfig,
    seed: u64,
    t: usize,
    outer: &Member,
    batch: &[Member],
    second_term: bool,
) -> OuterResult {
    let q = outer.prep.theta.len();
    let tt = cfg.t as f64;
    let uu = cfg.u as f64;
    let log_t = tt.ln();
    let need_batch = cfg.objective == Objective::FullMi || cfg.mle_source == MleSource::Proxy || !has_exact_mle(model);
    let mut res = OuterResult {
        a: vec![0.0; q],
        w: if second_term { vec![0.0; batch.len() * q] } else { Vec::new() },
        ..Default::default()
    };
    let mut r = rng::stream(seed, tags::DATA, t as u64);
    let mut ll = Vec::with_capacity(batch.len());
    let mut score = vec![0.0; q];
    let mut score_s = vec![0.0; q];
    for _ in 0..cfg.u {
        let stats = model.sample_stats(&outer.prep.theta, cfg.n_data, &mut r);
        let lt = model.log_lik_prepared(&stats, &outer.prep);
        model.score_stats(&stats, &outer.prep.theta, &mut score);
        if need_batch {
            log_liks(model, &stats, batch, &mut ll);
        }
        let (log_num, lse) = match cfg.objective {
            Objective::FullMi => {
                let lse = log_sum_exp(&ll);
                (lse - log_t, lse)
            }
            Objective::LowerBound => (log_mle(model, &stats, cfg.mle_source, &ll, lt), f64::NAN),
        };
        let (lr, c) = clamp_log_ratio(log_num - lt);
        res.clamped += c as usize;
        let big_f = div.big_f_of_log(lr).0;
        res.value += div.f_of_log(lr).0 / uu;
        for (a, s) in res.a.iter_mut().zip(&score) {
            *a += big_f * s / uu;
        }
        if second_term {
            let coef = div.x_df(lr.exp()) / (tt * uu);
            for (s, m) in batch.iter().enumerate() {
                let pi = (ll[s] - lse).exp();
                if pi == 0.0 {
                    continue;
                }
                model.score_stats(&stats, &m.prep.theta, &mut score_s);
                let w = &mut res.w[s * q..(s + 1) * q];
                for (wj, sj) in w.iter_mut().zip(&score_s) {
                    *wj += coef * pi * sj;
                }
            }
        }
    }
    res
}

fn has_exact_mle(model: &ModelSpec) -> bool {
    !matches!(model, ModelSpec::Probit { .. })
}

/// Shared implementation of every gradient estimator.
///
/// `second_term` enables the marginal-dependence term of the full MI
/// (ignored for KL and for the lower bound). `extra` adds θ-space terms at
/// the outer draws.
pub(crate) fn gradient_with(
    net: &PriorNetwork,
    model: &ModelSpec,
    div: &DivergenceSpec,
    cfg: &EstimatorConfig,
    seed: u64,
    second_term: bool,
    extra: Option<&ExtraTerm>,
) -> Result<GradEstimate> {
    cfg.validate()?;
    div.validate()?;
    check_compat(net, model)?;
    if cfg.objective == Objective::LowerBound && !div.is_decreasing() {
        return Err(Error::invalid(
            "the lower bound needs a decreasing generator (KL or stabilized α)",
        ));
    }
    let second_term = second_term && cfg.objective == Objective::FullMi && !div.is_kl();
    let t_count = cfg.t;
    let q = net.output_dim();

    let outers = (0..t_count)
        .map(|t| outer_member(net, model, seed, t))
        .collect::<Result<Vec<_>>>()?;
    let batches: Vec<Vec<Member>> = if cfg.common_random_numbers {
        vec![marginal_batch(net, model, seed, 0, t_count)?]
    } else {
        (0..t_count)
            .map(|t| marginal_batch(net, model, seed, t + 1, t_count))
            .collect::<Result<_>>()?
    };
    let batch_of = |t: usize| if cfg.common_random_numbers { 0 } else { t };

    let run = |t: usize| outer_term(model, div, cfg, seed, t, &outers[t], &batches[batch_of(t)], second_term);
    let results: Vec<OuterResult> = if cfg.threads <= 1 {
        (0..t_count).map(run).collect()
    } else {
        let chunk = t_count.div_ceil(cfg.threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..t_count)
                .step_by(chunk)
                .map(|start| {
                    let run = &run;
                    scope.spawn(move || (start..(start + chunk).min(t_count)).map(run).collect::<Vec<_>>())
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("gradient worker panicked"))
                .collect()
        })
    };

    let outer_thetas: Vec<Vec<f64>> = outers.iter().map(|m| m.pass.theta.clone()).collect();
    let extras = extra.map(|f| f(&outer_thetas));

    let mut grad = vec![0.0; net.num_params()];
    let mut clamped = 0;
    let mut value = 0.0;
    let mut w_sum: Vec<Vec<f64>> = batches.iter().map(|b| vec![0.0; b.len() * q]).collect();
    let inv_t = 1.0 / t_count as f64;
    for (t, res) in results.iter().enumerate() {
        clamped += res.clamped;
        value += res.value * inv_t;
        let mut a = res.a.clone();
        if let Some(ex) = &extras {
            for (aj, ej) in a.iter_mut().zip(&ex[t]) {
                *aj += ej;
            }
        }
        net.accumulate_vjp(&outers[t].pass, &outers[t].eps, &a, inv_t, &mut grad);
        if second_term {
            for (acc, w) in w_sum[batch_of(t)].iter_mut().zip(&res.w) {
                *acc += w;
            }
        }
    }
    if second_term {
        for (batch, w) in batches.iter().zip(&w_sum) {
            for (s, m) in batch.iter().enumerate() {
                net.accumulate_vjp(&m.pass, &m.eps, &w[s * q..(s + 1) * q], 1.0, &mut grad);
            }
        }
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            epoch: 0,
            what: format!("gradient coordinate {i}"),
            state_dump: net.to_json(),
        });
    }
    Ok(GradEstimate {
        grad,
        clamped,
        value,
        outer_thetas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pushforward::{Activation, Architecture, InitConfig, OutputHead};

    fn toy_net(w: f64, b: f64) -> PriorNetwork {
        PriorNetwork::from_params(
            Architecture::SingleLayer,
            OutputHead::Componentwise(vec![Activation::Sigmoid]),
            1,
            1,
            0.0,
            vec![w, b],
        )
        .unwrap()
    }

    fn toy_cfg() -> EstimatorConfig {
        EstimatorConfig {
            n_data: 3,
            t: 20,
            u: 10,
            n_outer: 50,
            ..Default::default()
        }
    }

    #[test]
    fn dirac_marginal_equals_likelihood() {
        let net = toy_net(0.0, 0.4);
        let model = ModelSpec::Bernoulli;
        let data = DataSet::Bernoulli(vec![true, false, true]);
        let theta = net.forward(&[0.0]).unwrap();
        let exact = model.log_likelihood(&data, &theta).unwrap().exp();
        for t in [1, 5, 50] {
            let p = estimate_marginal(&net, &model, &data, t, 3).unwrap();
            assert!((p - exact).abs() < 1e-15 * exact);
            let m = mle_proxy(&net, &model, &data, t, 3).unwrap();
            assert!((m - exact).abs() < 1e-15 * exact);
        }
    }

    #[test]
    fn dirac_mi_is_zero() {
        let net = toy_net(0.0, -0.3);
        for div in [DivergenceSpec::Kl, DivergenceSpec::alpha(0.5, true).unwrap()] {
            let est = estimate_mi(&net, &ModelSpec::Bernoulli, &div, &toy_cfg(), 1).unwrap();
            assert!(est.value.abs() < 1e-12, "{est:?}");
        }
    }

    #[test]
    fn single_draw_marginal_is_that_likelihood() {
        let net = toy_net(1.3, 0.2);
        let model = ModelSpec::Bernoulli;
        let data = DataSet::Bernoulli(vec![true, true, false]);
        let p = estimate_marginal(&net, &model, &data, 1, 8).unwrap();
        let mut r = rng::stream(8, tags::MARGINAL, 0);
        let eps = net.latent().draw(&mut r);
        let theta = net.forward(&eps).unwrap();
        let exact = model.log_likelihood(&data, &theta).unwrap().exp();
        assert!((p - exact).abs() < 1e-15);
    }

    #[test]
    fn proxy_dominates_marginal() {
        let model = ModelSpec::Multinomial { n: 10, q: 4 };
        let net = PriorNetwork::init(Architecture::SingleLayer, OutputHead::Softmax, 5, 4, InitConfig { weight_std: 1.0, ..Default::default() }, 1).unwrap();
        let data = model.sample_data(&[0.1, 0.2, 0.3, 0.4], 10, 2).unwrap();
        let p = estimate_marginal(&net, &model, &data, 30, 4).unwrap();
        let m = mle_proxy(&net, &model, &data, 30, 4).unwrap();
        let mle = model.raw_mle(&data).unwrap().unwrap();
        let best = model.log_likelihood(&data, &mle).unwrap().exp();
        assert!(m >= p);
        assert!(m <= best);
    }

    #[test]
    fn kl_full_gradient_has_no_second_term() {
        let net = toy_net(0.7, -0.2);
        let cfg = toy_cfg();
        let a = grad_full_mi(&net, &ModelSpec::Bernoulli, &DivergenceSpec::Kl, &cfg, 5).unwrap();
        let b = grad_full_mi_first_term(&net, &ModelSpec::Bernoulli, &DivergenceSpec::Kl, &cfg, 5).unwrap();
        assert_eq!(a.grad, b.grad);
    }

    #[test]
    fn gradient_is_deterministic_and_thread_independent() {
        let net = toy_net(0.7, -0.2);
        let div = DivergenceSpec::alpha(0.5, false).unwrap();
        let mut cfg = toy_cfg();
        let a = grad_full_mi(&net, &ModelSpec::Bernoulli, &div, &cfg, 5).unwrap();
        let b = grad_full_mi(&net, &ModelSpec::Bernoulli, &div, &cfg, 5).unwrap();
        cfg.threads = 3;
        let c = grad_full_mi(&net, &ModelSpec::Bernoulli, &div, &cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn lower_bound_rejects_increasing_generator() {
        let net = toy_net(0.7, -0.2);
        let div = DivergenceSpec::alpha(0.5, false).unwrap();
        assert!(grad_lower_bound(&net, &ModelSpec::Bernoulli, &div, &toy_cfg(), 1).is_err());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let net = toy_net(0.7, -0.2);
        let model = ModelSpec::Multinomial { n: 10, q: 4 };
        assert!(matches!(
            estimate_mi(&net, &model, &DivergenceSpec::Kl, &toy_cfg(), 1),
            Err(Error::Shape(_))
        ));
    }
}
