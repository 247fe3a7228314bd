//! The `varp` binary end to end: exit codes, artifacts and plot data.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_varp");

const TINY: &str = r#"
name = "tiny"
seed = 4

[model]
kind = "gauss_var"
mu = 0.0

[network]
latent_dim = 3
head = { kind = "componentwise", activations = ["exp"] }

[divergence]
kind = "alpha"
alpha = 0.5

[estimator]
n_data = 10
t = 10
u = 10
n_outer = 10

[optimizer]
epochs = 10
lr = 0.01
monitor_every = 5

[posterior]
data = { kind = "simulate", theta_true = [1.0], n_obs = 10, seed = 3 }

[posterior.mh]
total_iters = 2000
keep_last = 1000

[evaluation]
metrics = ["mi_final", "posterior_ks", "mean_norm_error"]
posterior_samples = 1000
"#;

fn varp(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("VARP_SEED").output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.toml");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn run_tiny(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let cfg = write_config(dir, TINY);
    let out = dir.join(name);
    let mut args = vec!["run", &cfg, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = varp(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn malformed_config_exits_with_1_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &TINY.replace("lr = 0.01", "lr = 0.01\nlearning_rate = 3"));
    let out = tmp.path().join("out");
    let o = varp(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("optimizer"));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 1);

    let o = varp(&["validate-config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let o = varp(&["validate-config", &write_config(tmp.path(), "not = [toml")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_values_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for bad in [
        TINY.replace("alpha = 0.5", "alpha = 1.5"),
        TINY.replace("keep_last = 1000", "keep_last = 5000"),
        TINY.replace("latent_dim = 3", "latent_dim = 0"),
    ] {
        let cfg = write_config(tmp.path(), &bad);
        assert_eq!(varp(&["validate-config", &cfg]).status.code(), Some(1), "{bad}");
    }
    let cfg = write_config(tmp.path(), TINY);
    let o = varp(&["validate-config", &cfg]);
    assert!(o.status.success());
}

#[test]
fn unknown_ids_and_missing_artifacts() {
    assert_eq!(varp(&["reproduce", "no_such_experiment"]).status.code(), Some(1));
    let listed = varp(&["reproduce", "--list"]);
    assert!(listed.status.success());
    assert_eq!(String::from_utf8_lossy(&listed.stdout).lines().count(), 10);

    let tmp = tempfile::tempdir().unwrap();
    let o = varp(&["emit-plot-data", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = varp(&["run", tmp.path().join("absent.toml").to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn run_writes_artifacts_and_plot_data() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_tiny(tmp.path(), "run", &[]);
    for f in ["manifest.json", "metrics.json", "network.json", "mi_trace.csv", "posterior_chain.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let (header, rows) = csv_rows(&out.join("mi_trace.csv"));
    assert_eq!(header, ["epoch", "mi_mean", "mi_lo95", "mi_hi95", "mi_se", "constraint_gap"]);
    assert!(!rows.is_empty());

    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 4);

    assert_eq!(varp(&["emit-plot-data", out.to_str().unwrap(), "no_such_figure"]).status.code(), Some(1));
    let o = varp(&["emit-plot-data", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let plots = out.join("plots");

    let (_, rows) = csv_rows(&plots.join("posterior_scatter.csv"));
    assert_eq!(rows.len(), 1000);

    let (header, rows) = csv_rows(&plots.join("posterior_ecdf.csv"));
    assert_eq!(header, ["source", "component", "value", "cdf"]);
    let mut last: Option<(String, f64, f64)> = None;
    for r in &rows {
        let (v, c): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!((0.0..=1.0).contains(&c));
        if let Some((src, lv, lc)) = &last {
            if *src == format!("{}{}", r[0], r[1]) {
                assert!(v >= *lv && c > *lc);
            }
        }
        last = Some((format!("{}{}", r[0], r[1]), v, c));
    }
    // No constraint, so no gap figure.
    assert!(!plots.join("constraint_gap.csv").exists());
    assert!(plots.join("chain_trace.csv").is_file());
}

#[test]
fn runs_are_deterministic_across_threads_and_seed_sources() {
    let tmp = tempfile::tempdir().unwrap();
    let read = |p: &Path| std::fs::read(p.join("metrics.json")).unwrap();
    let a = read(&run_tiny(tmp.path(), "a", &["--seed", "9"]));
    let b = read(&run_tiny(tmp.path(), "b", &["--seed", "9", "--threads", "3"]));
    assert_eq!(a, b);

    let cfg = write_config(tmp.path(), TINY);
    let out = tmp.path().join("env");
    let o = Command::new(BIN)
        .args(["run", &cfg, "--out", out.to_str().unwrap()])
        .env("VARP_SEED", "9")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(read(&out), a);

    let c = read(&run_tiny(tmp.path(), "c", &["--seed", "10"]));
    assert_ne!(a, c);
}

#[test]
fn rerun_replaces_a_previous_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_tiny(tmp.path(), "same", &[]);
    std::fs::write(out.join("stale.txt"), "x").unwrap();
    run_tiny(tmp.path(), "same", &[]);
    assert!(!out.join("stale.txt").exists());

    // A directory that is not a run directory is left alone.
    let foreign = tmp.path().join("foreign");
    std::fs::create_dir(&foreign).unwrap();
    std::fs::write(foreign.join("keep.txt"), "x").unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let o = varp(&["run", &cfg, "--out", foreign.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(foreign.join("keep.txt").is_file());
}
