//! Sample the posterior of a fitted normal-variance prior by Metropolis on
//! the latent variable and compare it with the inverse-gamma Jeffreys
//! posterior.
//!
//! cargo run --release --example posterior_sampling

use varp::divergences::DivergenceSpec;
use varp::evaluation::{gaussvar_jeffreys_posterior, ks_distance, mean_norm_error};
use varp::objectives::{EstimatorConfig, MleSource, Objective};
use varp::optimizer::{train, AdamConfig, TrainConfig};
use varp::posterior_mh::{mh_run, MhConfig};
use varp::pushforward::{Activation, Architecture, InitConfig, OutputHead, PriorNetwork};
use varp::stat_models::ModelSpec;

fn main() -> varp::Result<()> {
    let model = ModelSpec::GaussVar { mu: 0.0 };
    let div = DivergenceSpec::alpha(0.5, true)?;
    let net = PriorNetwork::init(
        Architecture::SingleLayer,
        OutputHead::Componentwise(vec![Activation::Exp]),
        10,
        1,
        InitConfig::default(),
        1,
    )?;
    let cfg = TrainConfig {
        epochs: 2000,
        adam: AdamConfig::with_lr(0.025),
        estimator: EstimatorConfig {
            n_data: 10,
            t: 50,
            u: 1000,
            n_outer: 100,
            objective: Objective::LowerBound,
            mle_source: MleSource::Exact,
            ..Default::default()
        },
        monitor_every: 0,
        ..Default::default()
    };
    let net = train(net, &model, &div, &cfg, None, 2)?.net;

    let data = model.sample_data(&[1.0], 10, 11)?;
    let mh = MhConfig {
        total_iters: 40_000,
        keep_last: 20_000,
        ..Default::default()
    };
    let out = mh_run(&net, &model, &data, &mh, 3)?;
    let d = &out.diagnostics;
    println!(
        "acceptance: burn-in {:.3}, kept {:.3}; final scale {:.3}",
        d.acceptance_burn_in, d.acceptance_kept, d.final_scale
    );
    if let Some([l1, l5, l10]) = d.autocorrelation {
        println!("autocorrelation at lags 1/5/10: {l1:.3} {l5:.3} {l10:.3}");
    }

    let exact = gaussvar_jeffreys_posterior(&model, &data)?;
    let theta: Vec<f64> = out.theta_samples.iter().map(|t| t[0]).collect();
    println!("KS distance to the Jeffreys posterior: {:.4}", ks_distance(&theta, |x| exact.cdf(x))?);
    println!("posterior mean {:.4} (exact {:.4})", theta.iter().sum::<f64>() / theta.len() as f64, exact.mean());
    println!("mean ‖θ − θ_true‖: {:.4}", mean_norm_error(&out.theta_samples, &[1.0])?);
    Ok(())
}
