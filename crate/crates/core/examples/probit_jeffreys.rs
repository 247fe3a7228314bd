//! The probit model's Jeffreys prior on a grid: Fisher information by
//! quadrature, the edge slopes of log J in log θ₂ and a reference posterior
//! drawn by Metropolis in θ.
//!
//! cargo run --release --example probit_jeffreys

use varp::evaluation::{mh_theta_reference, probit_fisher, probit_jeffreys_grid, GridConfig, QuadratureConfig};
use varp::posterior_mh::MhConfig;
use varp::runner::reproduce::slope_deviations;
use varp::stat_models::ModelSpec;

fn main() -> varp::Result<()> {
    let model = ModelSpec::Probit { mu_a: 0.0, sigma2_a: 1.0 };
    let fisher = probit_fisher(&model, [1.0, 0.5], &QuadratureConfig::default())?;
    println!("Fisher information at (1, 0.5): {:?}", fisher.matrix);

    let cfg = GridConfig {
        n_theta1: 40,
        n_theta2: 40,
        ..Default::default()
    };
    let grid = probit_jeffreys_grid(&model, &cfg, 1)?;
    let (lo, hi) = slope_deviations(&grid);
    println!("largest slope deviation: {lo:.3} from -1 as θ₂ → 0, {hi:.3} from -3 as θ₂ → ∞");

    let data = model.sample_data(&[3.37, 0.43], 50, 11)?;
    let mh = MhConfig {
        total_iters: 20_000,
        keep_last: 10_000,
        ..Default::default()
    };
    let chain = mh_theta_reference(&grid, &model, &data, &mh, 5)?;
    let n = chain.theta_samples.len() as f64;
    let mean: Vec<f64> = (0..2).map(|j| chain.theta_samples.iter().map(|t| t[j]).sum::<f64>() / n).collect();
    println!("reference posterior mean {:.3?}, acceptance {:.3}", mean, chain.diagnostics.acceptance_kept);
    Ok(())
}
