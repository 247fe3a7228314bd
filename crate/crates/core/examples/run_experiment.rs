//! Drive the experiment runner from code: run a small config, print its
//! metrics and emit plotting CSVs.
//!
//! cargo run --release --example run_experiment -- [out_dir]

use std::path::PathBuf;

use varp::runner::{emit_plot_data, run_config, ExperimentConfig, RunOptions};

const CONFIG: &str = r#"
name = "example_gaussvar"
seed = 3

[model]
kind = "gauss_var"
mu = 0.0

[network]
latent_dim = 10
head = { kind = "componentwise", activations = ["exp"] }

[divergence]
kind = "alpha"
alpha = 0.5

[estimator]
n_data = 10
t = 50
u = 200
n_outer = 50
objective = "lower_bound"
mle_source = "exact"

[optimizer]
epochs = 200
lr = 0.025
monitor_every = 20

[posterior]
data = { kind = "simulate", theta_true = [1.0], n_obs = 10, seed = 11 }

[posterior.mh]
total_iters = 20000
keep_last = 10000

[evaluation]
metrics = ["mi_final", "posterior_ks", "mean_norm_error"]
posterior_samples = 10000
"#;

fn main() -> varp::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("varp_example_run"));
    let mut cfg = ExperimentConfig::from_toml(CONFIG)?;
    RunOptions {
        out: Some(out),
        ..Default::default()
    }
    .apply(&mut cfg)?;
    let (dir, outcome) = run_config(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&outcome.metrics)?);
    for f in emit_plot_data(&dir, "all")? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
