//! Pinned reproductions of the benchmark experiments and their reports.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::divergences::DivergenceSpec;
use crate::error::{Error, Result};
use crate::evaluation::{ecdf, ecdf_envelope, EcdfCurve, JeffreysGrid};
use crate::pushforward::Architecture;
use crate::rng::derive_seed;
use crate::runner::config::{DataSource, ExperimentConfig, Metric, SweepBlock};
use crate::runner::experiment::{
    dataset, execute, execute_with, posterior_stage, with_staging, write_manifest, GridCache, Metrics, Outcome,
    RunOptions,
};
use crate::stat_models::DataSet;

pub const EXPERIMENTS: [&str; 10] = [
    "multinomial_prior",
    "multinomial_posterior",
    "probit_unconstrained",
    "probit_constrained",
    "gaussvar",
    "gaussvar_constrained",
    "alpha_sweep",
    "latent_dim_sweep",
    "seed_ecdf",
    "mean_norm_curve",
];

/// The TOML document behind a reproduction id.
pub fn pinned_source(id: &str) -> Result<&'static str> {
    Ok(match id {
        "multinomial_prior" => include_str!("../../configs/multinomial_prior.toml"),
        "multinomial_posterior" => include_str!("../../configs/multinomial_posterior.toml"),
        "probit_unconstrained" => include_str!("../../configs/probit_unconstrained.toml"),
        "probit_constrained" => include_str!("../../configs/probit_constrained.toml"),
        "gaussvar" => include_str!("../../configs/gaussvar.toml"),
        "gaussvar_constrained" => include_str!("../../configs/gaussvar_constrained.toml"),
        "alpha_sweep" => include_str!("../../configs/alpha_sweep.toml"),
        "latent_dim_sweep" => include_str!("../../configs/latent_dim_sweep.toml"),
        "seed_ecdf" => include_str!("../../configs/seed_ecdf.toml"),
        "mean_norm_curve" => include_str!("../../configs/mean_norm_curve.toml"),
        _ => {
            return Err(Error::Unknown(id.to_string()))
        }
    })
}

pub fn pinned_config(id: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_toml(pinned_source(id)?)?;
    if cfg.name.is_none() {
        cfg.name = Some(id.to_string());
    }
    Ok(cfg)
}

/// One line of a reproduction report. `pass` is `None` for values that are
/// reported without a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub threshold: String,
    pub pass: Option<bool>,
}

impl Check {
    pub fn at_most(name: &str, value: Option<f64>, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: format!("<= {limit}"),
            pass: Some(value.is_some_and(|v| v <= limit)),
        }
    }

    pub fn within(name: &str, value: Option<f64>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: format!("in [{lo}, {hi}]"),
            pass: Some(value.is_some_and(|v| v >= lo && v <= hi)),
        }
    }

    pub fn holds(name: &str, value: Option<f64>, threshold: &str, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: threshold.into(),
            pass: Some(pass),
        }
    }

    pub fn info(name: &str, value: Option<f64>) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: String::new(),
            pass: None,
        }
    }

    pub fn line(&self) -> String {
        let status = match self.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "INFO",
        };
        let value = self.value.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
        format!("{status} {}: {value} {}", self.name, self.threshold).trim_end().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// Table files written next to the report.
    pub tables: Vec<String>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass != Some(false))
    }

    pub fn lines(&self) -> Vec<String> {
        self.checks.iter().map(Check::line).collect()
    }
}

/// Acceptance band for final-window MH acceptance.
pub const ACCEPTANCE_BAND: (f64, f64) = (0.25, 0.55);
/// Tolerance on the asymptotic `log J` slopes in `log θ₂`.
pub const SLOPE_TOLERANCE: f64 = 0.1;

/// Checks derived from one run's metrics.
pub fn metric_checks(m: &Metrics, alpha: Option<f64>) -> Vec<Check> {
    let mut c = Vec::new();
    if let Some(mi) = m.mi_final {
        c.push(Check::info("mi_final", Some(mi.mean)));
    }
    if let (Some(alpha), Some([lo, hi])) = (alpha, m.mi_trace_band) {
        let upper = 1.0 / (alpha * (1.0 - alpha));
        c.push(Check::holds("mi_trace_min_plus_3se", Some(lo), ">= 0", lo >= 0.0));
        c.push(Check::holds("mi_trace_max_minus_3se", Some(hi), &format!("<= {upper}"), hi <= upper));
    }
    if let Some(p) = m.prior_mmd2 {
        c.push(Check::info("prior_mmd2_null_scale", Some(p.mmd2_se_null)));
    }
    if let Some(p) = m.posterior_mmd2 {
        c.push(Check::info("posterior_mmd2_null_scale", Some(p.mmd2_se_null)));
    }
    if let Some(a) = m.acceptance {
        c.push(Check::within("acceptance_kept", Some(a.kept), ACCEPTANCE_BAND.0, ACCEPTANCE_BAND.1));
    }
    if let Some(a) = m.reference_acceptance {
        c.push(Check::within(
            "reference_acceptance_kept",
            Some(a.kept),
            ACCEPTANCE_BAND.0,
            ACCEPTANCE_BAND.1,
        ));
    }
    if let Some(e) = m.mean_norm_error {
        c.push(Check::info("mean_norm_error", Some(e)));
    }
    if let Some(e) = m.reference_mean_norm_error {
        c.push(Check::info("reference_mean_norm_error", Some(e)));
    }
    c
}

/// Largest deviation of the edge slopes of `log J` in `log θ₂` from −1
/// (lower edge) and −3 (upper edge), over all `θ₁` rows.
pub fn slope_deviations(grid: &JeffreysGrid) -> (f64, f64) {
    let rows = grid.log_theta1.len();
    let lower = (0..rows).map(|i| (grid.theta2_edge_slope(i, false) + 1.0).abs()).fold(0.0, f64::max);
    let upper = (0..rows).map(|i| (grid.theta2_edge_slope(i, true) + 3.0).abs()).fold(0.0, f64::max);
    (lower, upper)
}

fn alpha_of(cfg: &ExperimentConfig) -> Option<f64> {
    match cfg.divergence {
        DivergenceSpec::Alpha { alpha, .. } => Some(alpha),
        _ => None,
    }
}

/// Checks for the single-run reproductions.
pub fn single_run_checks(id: &str, cfg: &ExperimentConfig, out: &Outcome) -> Vec<Check> {
    let m = &out.metrics;
    let mut c = metric_checks(m, alpha_of(cfg));
    match id {
        "multinomial_prior" => c.push(Check::at_most("prior_mmd2", m.prior_mmd2.map(|p| p.mmd2), 0.25)),
        "multinomial_posterior" => c.push(Check::at_most("posterior_mmd2", m.posterior_mmd2.map(|p| p.mmd2), 1e-2)),
        "probit_unconstrained" | "probit_constrained" => {
            if let Some(g) = &out.grid {
                let (lo, hi) = slope_deviations(g);
                c.push(Check::at_most("jeffreys_slope_dev_theta2_low", Some(lo), SLOPE_TOLERANCE));
                c.push(Check::at_most("jeffreys_slope_dev_theta2_high", Some(hi), SLOPE_TOLERANCE));
            }
            let mmd = m.posterior_mmd2.map(|p| p.mmd2);
            if id == "probit_unconstrained" {
                c.push(Check::at_most("posterior_mmd2", mmd, 1e-2));
            } else {
                c.push(Check::info("posterior_mmd2", mmd));
                c.push(Check::info("constraint_gap", m.constraint_gap));
            }
        }
        "gaussvar" => {
            c.push(Check::at_most("posterior_ks", m.posterior_ks, 0.05));
            c.push(Check::at_most("lag10_autocorrelation", m.autocorrelation.map(|a| a[2]), 0.5));
        }
        "gaussvar_constrained" => {
            if let Some(k) = m.constants {
                let dk = (k.k_hat - 0.5).abs();
                let dc = (k.c_hat - std::f64::consts::PI / 16.0).abs();
                c.push(Check::holds("k_hat", Some(k.k_hat), &format!("|K - 1/2| <= 3 se = {:.3e}", 3.0 * k.k_se), dk <= 3.0 * k.k_se));
                c.push(Check::holds("c_hat", Some(k.c_hat), &format!("|c - pi/16| <= 3 se = {:.3e}", 3.0 * k.c_se), dc <= 3.0 * k.c_se));
            }
            c.push(Check::at_most("constraint_gap", m.constraint_gap, 0.005));
            c.push(Check::at_most("prior_ks", m.prior_ks, 0.05));
            if let Some(ks) = m.posterior_ks {
                c.push(Check::info("posterior_ks", Some(ks)));
            }
        }
        _ => {}
    }
    c
}

fn write_report(dir: &Path, report: &Report) -> Result<()> {
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    let mut text = report.lines().join("\n");
    text.push('\n');
    std::fs::write(dir.join("report.txt"), text)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

/// `cfg` without its posterior part, for sweeps that evaluate a trained
/// network on several datasets.
fn train_only(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.posterior = None;
    c.evaluation
        .metrics
        .retain(|m| matches!(m, Metric::MiFinal | Metric::PriorMmd | Metric::PriorKs | Metric::ConstraintGap));
    c
}

fn sweep(cfg: &ExperimentConfig) -> SweepBlock {
    cfg.sweep.clone().unwrap_or_default()
}

fn alpha_sweep(cfg: &ExperimentConfig, dir: &Path, report: &mut Report) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("alpha_sweep.csv"))?;
    w.write_record([
        "alpha",
        "prior_mmd2",
        "prior_mmd2_null_scale",
        "posterior_mmd2",
        "posterior_mmd2_null_scale",
        "mi_final",
        "acceptance",
    ])?;
    for &alpha in &sweep(cfg).alphas {
        let mut c = cfg.clone();
        c.divergence = DivergenceSpec::Alpha { alpha, stabilized: true };
        c.validate()?;
        let sub = dir.join(format!("alpha_{alpha}"));
        std::fs::create_dir(&sub)?;
        let m = execute(&c, Some(&sub))?.metrics;
        w.write_record([
            alpha.to_string(),
            fmt_opt(m.prior_mmd2.map(|p| p.mmd2)),
            fmt_opt(m.prior_mmd2.map(|p| p.mmd2_se_null)),
            fmt_opt(m.posterior_mmd2.map(|p| p.mmd2)),
            fmt_opt(m.posterior_mmd2.map(|p| p.mmd2_se_null)),
            fmt_opt(m.mi_final.map(|s| s.mean)),
            fmt_opt(m.acceptance.map(|a| a.kept)),
        ])?;
        report.checks.push(Check::info(&format!("alpha={alpha} prior_mmd2"), m.prior_mmd2.map(|p| p.mmd2)));
        report
            .checks
            .push(Check::info(&format!("alpha={alpha} posterior_mmd2"), m.posterior_mmd2.map(|p| p.mmd2)));
    }
    w.flush()?;
    report.tables.push("alpha_sweep.csv".into());
    Ok(())
}

fn latent_dim_sweep(cfg: &ExperimentConfig, dir: &Path, report: &mut Report) -> Result<()> {
    let s = sweep(cfg);
    let mut w = csv::Writer::from_path(dir.join("latent_dim_sweep.csv"))?;
    w.write_record([
        "latent_dim",
        "layers",
        "prior_mmd2",
        "prior_mmd2_null_scale",
        "posterior_mmd2",
        "posterior_mmd2_null_scale",
        "mi_final",
        "acceptance",
    ])?;
    for &p in &s.latent_dims {
        for (layers, arch) in [(1, Architecture::SingleLayer), (2, Architecture::TwoLayerPrelu { hidden_dim: s.hidden_dim })] {
            let mut c = cfg.clone();
            c.network.latent_dim = p;
            c.network.architecture = arch;
            c.validate()?;
            let sub = dir.join(format!("p{p}_l{layers}"));
            std::fs::create_dir(&sub)?;
            let m = execute(&c, Some(&sub))?.metrics;
            w.write_record([
                p.to_string(),
                layers.to_string(),
                fmt_opt(m.prior_mmd2.map(|p| p.mmd2)),
                fmt_opt(m.prior_mmd2.map(|p| p.mmd2_se_null)),
                fmt_opt(m.posterior_mmd2.map(|p| p.mmd2)),
                fmt_opt(m.posterior_mmd2.map(|p| p.mmd2_se_null)),
                fmt_opt(m.mi_final.map(|s| s.mean)),
                fmt_opt(m.acceptance.map(|a| a.kept)),
            ])?;
            report
                .checks
                .push(Check::info(&format!("p={p} layers={layers} prior_mmd2"), m.prior_mmd2.map(|p| p.mmd2)));
            report.checks.push(Check::info(
                &format!("p={p} layers={layers} posterior_mmd2"),
                m.posterior_mmd2.map(|p| p.mmd2),
            ));
        }
    }
    w.flush()?;
    report.tables.push("latent_dim_sweep.csv".into());
    Ok(())
}

/// Points at which ECDF envelopes are tabulated: 201 quantiles of the
/// pooled samples.
fn envelope_grid(curves: &[EcdfCurve]) -> Vec<f64> {
    let mut pooled: Vec<f64> = curves.iter().flat_map(|c| c.support.iter().copied()).collect();
    pooled.sort_by(f64::total_cmp);
    (0..=200).map(|k| pooled[(k * (pooled.len() - 1)) / 200]).collect()
}

fn seed_ecdf(cfg: &ExperimentConfig, dir: &Path, report: &mut Report) -> Result<()> {
    let seeds = sweep(cfg).seeds;
    let q = cfg.model.param_dim();
    let mut fitted: Vec<Vec<EcdfCurve>> = vec![Vec::new(); q];
    let mut reference: Vec<Vec<EcdfCurve>> = vec![Vec::new(); q];
    let mut cache = GridCache::default();
    for s in 0..seeds as u64 {
        let mut c = cfg.clone();
        c.seed = derive_seed(cfg.seed, &[s]);
        let out = execute(&train_only(&c), None)?;
        let pb = c.posterior.as_ref().ok_or_else(|| Error::config("posterior", "seed_ecdf needs a posterior block"))?;
        let x = dataset(&c, &pb.data)?;
        let mut metrics = out.metrics;
        let post = posterior_stage(&c, &out.net, &x, None, c.seed, None, &mut cache, &mut metrics)?;
        for j in 0..q {
            let xs: Vec<f64> = post.fitted.iter().map(|t| t[j]).collect();
            fitted[j].push(ecdf(&xs)?);
            if let Some(r) = &post.reference {
                let ys: Vec<f64> = r.iter().map(|t| t[j]).collect();
                reference[j].push(ecdf(&ys)?);
            }
        }
    }
    for j in 0..q {
        for (label, curves) in [("fitted", &fitted[j]), ("reference", &reference[j])] {
            if curves.is_empty() {
                continue;
            }
            let grid = envelope_grid(curves);
            let env = ecdf_envelope(curves, &grid)?;
            let file = format!("ecdf_envelope_{label}_theta{}.csv", j + 1);
            env.write_csv(&dir.join(&file))?;
            report.tables.push(file);
            let mid = grid[grid.len() / 2];
            report
                .checks
                .push(Check::info(&format!("{label} theta{} band width at median", j + 1), Some(env.width_at(mid))));
        }
    }
    report.checks.push(Check::info("seeds", Some(seeds as f64)));
    Ok(())
}

/// Prefix of `x` with `n` observations.
fn prefix(x: &DataSet, n: usize) -> DataSet {
    match x {
        DataSet::Multinomial(v) => DataSet::Multinomial(v[..n].to_vec()),
        DataSet::Probit(v) => DataSet::Probit(v[..n].to_vec()),
        DataSet::GaussVar(v) => DataSet::GaussVar(v[..n].to_vec()),
        DataSet::Bernoulli(v) => DataSet::Bernoulli(v[..n].to_vec()),
    }
}

fn mean_norm_curve(cfg: &ExperimentConfig, dir: &Path, report: &mut Report) -> Result<()> {
    let s = sweep(cfg);
    let Some(DataSource::Simulate { theta_true, .. }) = cfg.posterior.as_ref().map(|p| &p.data) else {
        return Err(Error::config("posterior.data", "mean_norm_curve needs simulated data"));
    };
    let n_max = s.n_values.iter().copied().max().unwrap_or(0);
    if n_max == 0 {
        return Err(Error::config("sweep.n_values", "must be nonempty and positive"));
    }
    let trained = execute(&train_only(cfg), Some(dir))?;
    let mut cache = GridCache::default();
    let mut w = csv::Writer::from_path(dir.join("mean_norm_curve.csv"))?;
    w.write_record(["n", "dataset", "fitted_error", "reference_error", "acceptance"])?;
    let mut means = Vec::new();
    for &n in &s.n_values {
        let mut sum = 0.0;
        for d in 0..s.datasets_per_n as u64 {
            // datasets grow by appending observations as n increases
            let full = cfg.model.sample_data(theta_true, n_max, derive_seed(cfg.seed, &[d, 1]))?;
            let x = prefix(&full, n);
            let mut m = Metrics::default();
            let chain_seed = derive_seed(cfg.seed, &[d, n as u64]);
            posterior_stage(cfg, &trained.net, &x, Some(theta_true), chain_seed, None, &mut cache, &mut m)?;
            let e = m.mean_norm_error.unwrap_or(f64::NAN);
            sum += e;
            w.write_record([
                n.to_string(),
                d.to_string(),
                e.to_string(),
                fmt_opt(m.reference_mean_norm_error),
                fmt_opt(m.acceptance.map(|a| a.kept)),
            ])?;
        }
        let mean = sum / s.datasets_per_n as f64;
        report.checks.push(Check::info(&format!("n={n} mean fitted error"), Some(mean)));
        means.push(mean);
    }
    w.flush()?;
    report.tables.push("mean_norm_curve.csv".into());
    let decreasing = means.windows(2).all(|p| p[1] < p[0]);
    report.checks.push(Check::holds(
        "mean error decreasing in n",
        None,
        "strictly decreasing",
        decreasing,
    ));
    Ok(())
}

/// `reproduce <id>`: run the pinned configuration and write `report.json`
/// next to the usual artifacts.
pub fn reproduce(id: &str, opts: &RunOptions) -> Result<(PathBuf, Report)> {
    reproduce_config(id, pinned_config(id)?, opts)
}

/// [`reproduce`] with a caller-supplied configuration in place of the
/// pinned one, e.g. a scaled-down copy. `id` selects the report and sweep.
pub fn reproduce_config(id: &str, mut cfg: ExperimentConfig, opts: &RunOptions) -> Result<(PathBuf, Report)> {
    if !EXPERIMENTS.contains(&id) {
        return Err(Error::Unknown(id.to_string()));
    }
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(PathBuf::from("runs").join(id));
    }
    opts.apply(&mut cfg)?;
    cfg.validate()?;
    let out = cfg.output_dir.clone().expect("set above");
    let report = with_staging(&out, |dir| {
        let mut report = Report {
            experiment: id.to_string(),
            seed: cfg.seed,
            checks: Vec::new(),
            tables: Vec::new(),
            notes: Vec::new(),
        };
        let mut net = None;
        match id {
            "alpha_sweep" => alpha_sweep(&cfg, dir, &mut report)?,
            "latent_dim_sweep" => latent_dim_sweep(&cfg, dir, &mut report)?,
            "seed_ecdf" => seed_ecdf(&cfg, dir, &mut report)?,
            "mean_norm_curve" => mean_norm_curve(&cfg, dir, &mut report)?,
            _ => {
                let outcome = execute_with(&cfg, None, Some(dir))?;
                report.checks = single_run_checks(id, &cfg, &outcome);
                report.notes = outcome.metrics.notes.clone();
                net = Some(outcome.net);
            }
        }
        let mut notes = vec!["pinned configuration; epoch counts are desk-scale choices".to_string()];
        if cfg.model.name() == "probit" {
            notes.push("probit θ_true is pinned to a value close to the published one".into());
        }
        write_report(dir, &report)?;
        write_manifest(dir, &cfg, net.as_ref(), notes)?;
        Ok(report)
    })?;
    Ok((out, report))
}
