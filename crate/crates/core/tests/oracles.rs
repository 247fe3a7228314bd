//! Library estimators against independent closed forms and quadrature.

mod common;

use common::{ks_distance, Gen, Toy};
use varp::divergences::DivergenceSpec;
use varp::evaluation::{
    constrained_gaussvar_prior_cdf, constrained_gaussvar_prior_pdf, gaussvar_jeffreys_posterior,
    multinomial_jeffreys_posterior, probit_fisher, probit_fisher_mc, sample_dirichlet, QuadratureConfig,
};
use varp::objectives::{estimate_lower_bound, estimate_mi, EstimatorConfig, MleSource, Objective};
use varp::optimizer::pipeline::constants_log_uniform;
use varp::optimizer::ConstraintFn;
use varp::pushforward::{Activation, Architecture, OutputHead, PriorNetwork};
use varp::stat_models::{DataSet, ModelSpec};

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

#[test]
fn mi_estimates_match_the_enumerated_toy() {
    let toy = Toy::new();
    let (w, b) = (0.9, 0.3);
    let net = toy_net(w, b);
    for (div, g) in [
        (DivergenceSpec::kl(), Gen::Kl),
        (DivergenceSpec::alpha(0.5, false).unwrap(), Gen::Alpha(0.5)),
        (DivergenceSpec::alpha(0.5, true).unwrap(), Gen::AlphaHat(0.5)),
    ] {
        let cfg = EstimatorConfig {
            n_data: toy.n,
            t: 400,
            u: 200,
            n_outer: 400,
            objective: Objective::FullMi,
            ..Default::default()
        };
        let est = estimate_mi(&net, &ModelSpec::Bernoulli, &div, &cfg, 3).unwrap();
        let exact = toy.mi(w, b, &g);
        assert!((est.value - exact).abs() < 4.0 * est.std_error + 2e-3, "{div:?}: {} vs {exact}", est.value);

        let cfg = EstimatorConfig {
            mle_source: MleSource::Exact,
            objective: Objective::LowerBound,
            ..cfg
        };
        let est = estimate_lower_bound(&net, &ModelSpec::Bernoulli, &div, &cfg, 4).unwrap();
        let exact = toy.lower_bound(w, b, &g, 1e-6);
        assert!((est.value - exact).abs() < 4.0 * est.std_error, "{div:?}: {} vs {exact}", est.value);
    }
}

#[test]
fn normal_variance_posterior_is_inverse_gamma() {
    let model = ModelSpec::GaussVar { mu: 0.5 };
    let data = DataSet::GaussVar(vec![0.1, 1.2, -0.7, 0.5, 2.0]);
    let post = gaussvar_jeffreys_posterior(&model, &data).unwrap();
    let s: f64 = [0.1f64, 1.2, -0.7, 0.5, 2.0].iter().map(|x| (x - 0.5).powi(2)).sum();
    // Γ⁻¹(N/2, S/2) has mean (S/2)/(N/2 − 1).
    assert!((post.mean() - (s / 2.0) / (2.5 - 1.0)).abs() < 1e-12);
    // Density integrates to one (trapezoid in log θ).
    let n = 20_000;
    let (lo, hi) = (-12.0f64, 12.0f64);
    let h = (hi - lo) / n as f64;
    let total: f64 = (0..=n)
        .map(|i| {
            let u = lo + i as f64 * h;
            let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
            wgt * post.pdf(u.exp()) * u.exp() * h
        })
        .sum();
    assert!((total - 1.0).abs() < 1e-6);
    let draws = post.sample(20_000, 5);
    assert!(ks_distance(&draws, |x| post.cdf(x)) < 0.015);
}

#[test]
fn dirichlet_posterior_adds_half_to_counts() {
    let data = DataSet::Multinomial(vec![vec![3, 0, 5, 2], vec![1, 1, 1, 7]]);
    let g = multinomial_jeffreys_posterior(&data).unwrap();
    assert_eq!(g, vec![4.5, 1.5, 6.5, 9.5]);
    let draws = sample_dirichlet(&g, 20_000, 1).unwrap();
    let total: f64 = g.iter().sum();
    for j in 0..4 {
        let m = draws.iter().map(|d| d[j]).sum::<f64>() / draws.len() as f64;
        let sd = (g[j] * (total - g[j]) / (total * total * (total + 1.0)) / draws.len() as f64).sqrt();
        assert!((m - g[j] / total).abs() < 4.0 * sd);
    }
}

#[test]
fn constrained_normal_variance_target_is_a_density() {
    let n = 40_000;
    let (lo, hi) = (-15.0f64, 15.0f64);
    let h = (hi - lo) / n as f64;
    let total: f64 = (0..n)
        .map(|i| {
            let u = lo + (i as f64 + 0.5) * h;
            constrained_gaussvar_prior_pdf(u.exp()) * u.exp() * h
        })
        .sum();
    assert!((total - 1.0).abs() < 1e-6);
    // CDF θ²/(1 + θ²).
    for t in [0.1, 1.0, 3.0] {
        assert!((constrained_gaussvar_prior_cdf(t) - t * t / (1.0 + t * t)).abs() < 1e-12);
    }
}

#[test]
fn log_uniform_constants_match_closed_forms() {
    let a = ConstraintFn::Rational { component: 0, beta: -1.0, tau: 1.0 };
    let k = constants_log_uniform(&a, 0.5, 400_000, 2).unwrap();
    assert!((k.k_hat - 0.5).abs() < 4.0 * k.k_se, "{k:?}");
    assert!((k.c_hat - std::f64::consts::PI / 16.0).abs() < 4.0 * k.c_se, "{k:?}");
}

#[test]
fn probit_fisher_quadrature_agrees_with_monte_carlo() {
    let model = ModelSpec::Probit { mu_a: 0.0, sigma2_a: 1.0 };
    for theta in [[1.0, 0.5], [3.37, 0.43], [0.2, 2.0]] {
        let q = probit_fisher(&model, theta, &QuadratureConfig::default()).unwrap();
        assert!(q.converged);
        let (mc, se) = probit_fisher_mc(&model, theta, 200_000, 9).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let tol = 4.0 * se[i][j] + 1e-6;
                assert!((q.matrix[i][j] - mc[i][j]).abs() < tol, "{theta:?} ({i},{j}): {} vs {}", q.matrix[i][j], mc[i][j]);
            }
        }
    }
}
