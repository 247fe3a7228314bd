//! Build a pushforward prior, draw from it, inspect its parameter Jacobian
//! and round-trip it through JSON.
//!
//! cargo run --release --example pushforward_sampling

use varp::pushforward::{Activation, Architecture, InitConfig, OutputHead, PriorNetwork};

fn main() -> varp::Result<()> {
    let net = PriorNetwork::init(
        Architecture::TwoLayerPrelu { hidden_dim: 8 },
        OutputHead::Componentwise(vec![Activation::Exp, Activation::Softplus]),
        10,
        2,
        InitConfig::default(),
        42,
    )?;
    println!("parameters: {}", net.num_params());

    let draws = net.sample_prior(10_000, 7);
    for j in 0..2 {
        let mean = draws.iter().map(|t| t[j]).sum::<f64>() / draws.len() as f64;
        let min = draws.iter().map(|t| t[j]).fold(f64::INFINITY, f64::min);
        println!("theta_{}: mean {mean:.4}, min {min:.4}", j + 1);
    }

    let eps = net.latent().sample(1, 3).remove(0);
    let jac = net.jacobian_params(&eps)?;
    let norm: f64 = jac.row(0).iter().map(|v| v * v).sum::<f64>().sqrt();
    println!("|d theta_1 / d lambda| at one latent draw: {norm:.4}");

    // The single-layer exp head has a closed-form log-normal marginal.
    let single = PriorNetwork::init(
        Architecture::SingleLayer,
        OutputHead::Componentwise(vec![Activation::Exp]),
        10,
        1,
        InitConfig::default(),
        1,
    )?;
    if let Some(d) = single.analytic_marginal(0, 1.0)? {
        println!("single-layer exp head: density at theta = 1 is {d:.4}");
    }

    let restored = PriorNetwork::from_json(&net.to_json())?;
    assert_eq!(restored, net);
    println!("JSON round trip ok");
    Ok(())
}
