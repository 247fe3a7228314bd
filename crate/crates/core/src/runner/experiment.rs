//! One configured experiment: train, sample, evaluate, persist.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::divergences::DivergenceSpec;
use crate::error::{Error, Result};
use crate::evaluation::{
    self, gaussvar_jeffreys_posterior, mh_theta_reference, mh_theta_with_prior, mmd2_unbiased_with, null_scale,
    probit_jeffreys_grid, sample_dirichlet, JeffreysGrid, KernelSpec, TabulatedCdf,
};
use crate::optimizer::{
    constrained_pipeline, train, ConstantSource, ConstraintFn, ConstraintSpec, MultiplierRow, PipelineConstants,
    TraceRow, TrainResult,
};
use crate::posterior_mh::{mh_run, softmax_proposal_covariance, write_chain_csv, MhConfig, MhOutput};
use crate::pushforward::{OutputHead, PriorNetwork};
use crate::rng::derive_seed;
use crate::runner::config::{DataSource, ExperimentConfig, Metric};
use crate::stat_models::{DataSet, ModelSpec};

/// Seed offsets of the independent parts of a run.
mod part {
    pub const INIT: u64 = 100;
    pub const INIT_CONSTRAINED: u64 = 101;
    pub const TRAIN: u64 = 200;
    pub const PRIOR_SAMPLES: u64 = 300;
    pub const POSTERIOR: u64 = 400;
    pub const REFERENCE: u64 = 500;
    pub const NULL: u64 = 600;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiSummary {
    pub epoch: usize,
    pub mean: f64,
    pub lo95: f64,
    pub hi95: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdMetric {
    pub mmd2: f64,
    pub mmd: f64,
    pub negative: bool,
    /// Standard deviation of MMD² under the permutation null.
    pub mmd2_se_null: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub burn_in: f64,
    pub kept: f64,
}

/// Contents of `metrics.json`. Every field is a deterministic function of
/// the config and seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub experiment: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mi_final: Option<MiSummary>,
    /// Smallest `mean + 3 se` and largest `mean − 3 se` over the MI trace.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mi_trace_band: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prior_mmd2: Option<MmdMetric>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub posterior_mmd2: Option<MmdMetric>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prior_ks: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub posterior_ks: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_norm_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference_mean_norm_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub constraint_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub constraint_target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub constants: Option<PipelineConstants>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub acceptance: Option<Acceptance>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference_acceptance: Option<Acceptance>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub autocorrelation: Option<[f64; 3]>,
    pub clamped_log_ratios: usize,
    pub notes: Vec<String>,
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub threads: usize,
    pub epochs: usize,
    /// The resolved configuration; re-running it reproduces the directory.
    pub config: ExperimentConfig,
    /// FNV-1a over the bits of the final network parameters.
    pub network_checksum: String,
    pub files: Vec<String>,
    pub notes: Vec<String>,
    pub version: String,
    pub timestamp: u64,
}

pub fn checksum(values: &[f64]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// In-memory results of [`execute`].
#[derive(Debug, Clone)]
pub struct Outcome {
    pub metrics: Metrics,
    pub net: PriorNetwork,
    pub prior_samples: Vec<Vec<f64>>,
    pub posterior: Option<MhOutput>,
    pub reference_posterior: Option<Vec<Vec<f64>>>,
    pub data: Option<DataSet>,
    pub grid: Option<JeffreysGrid>,
}

fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "mi_mean", "mi_lo95", "mi_hi95", "mi_se", "constraint_gap"])?;
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            r.mi_mean.to_string(),
            r.mi_lo95.to_string(),
            r.mi_hi95.to_string(),
            r.mi_se.to_string(),
            r.constraint_gap.map_or(String::new(), |g| g.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_multipliers(path: &Path, rows: &[MultiplierRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "constraint", "gap", "eta", "eta_tilde"])?;
    for r in rows {
        for k in 0..r.gaps.len() {
            w.write_record([
                r.epoch.to_string(),
                k.to_string(),
                r.gaps[k].to_string(),
                r.eta[k].to_string(),
                r.eta_tilde[k].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_samples(path: &Path, samples: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let q = samples.first().map_or(0, |s| s.len());
    w.write_record((1..=q).map(|j| format!("theta_{j}")))?;
    for s in samples {
        w.write_record(s.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("theta_"))
        .map(|(i, _)| i)
        .collect();
    r.records()
        .map(|rec| {
            let rec = rec?;
            cols.iter()
                .map(|&i| {
                    rec[i]
                        .parse::<f64>()
                        .map_err(|e| Error::domain(format!("{}: {e}", path.display())))
                })
                .collect()
        })
        .collect()
}

/// Evenly spaced subsample of at most `n` rows.
pub fn thin(samples: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    if samples.len() <= n {
        return samples.to_vec();
    }
    (0..n).map(|i| samples[i * samples.len() / n].clone()).collect()
}

pub fn dataset(cfg: &ExperimentConfig, source: &DataSource) -> Result<DataSet> {
    match source {
        DataSource::Simulate { theta_true, n_obs, seed } => cfg.model.sample_data(theta_true, *n_obs, *seed),
        DataSource::File { path } => DataSet::read_csv(path, &cfg.model),
    }
}

/// `(1/α) log a(θ)` when the constraint reshapes the reference prior.
fn constraint_log_factor(cfg: &ExperimentConfig) -> Option<(ConstraintFn, f64)> {
    match (&cfg.constraint, cfg.divergence) {
        (Some(c), DivergenceSpec::Alpha { alpha, .. }) => Some((c.function.clone(), alpha)),
        _ => None,
    }
}

fn mmd_metric(xs: &[Vec<f64>], ys: &[Vec<f64>], cfg: &ExperimentConfig, seed: u64) -> Result<MmdMetric> {
    let k = KernelSpec::default();
    let m = mmd2_unbiased_with(xs, ys, k, cfg.threads)?;
    let ev = &cfg.evaluation;
    let ns = null_scale(xs, ys, ev.null_permutations, ev.null_rows, seed, cfg.threads)?;
    Ok(MmdMetric {
        mmd2: m.mmd2,
        mmd: m.mmd,
        negative: m.negative,
        mmd2_se_null: ns.scale,
        samples: xs.len().min(ys.len()),
    })
}

fn acceptance(d: &crate::posterior_mh::MhDiagnostics) -> Acceptance {
    Acceptance {
        burn_in: d.acceptance_burn_in,
        kept: d.acceptance_kept,
    }
}

fn train_stage(cfg: &ExperimentConfig, dir: Option<&Path>, metrics: &mut Metrics) -> Result<PriorNetwork> {
    let seed = cfg.seed;
    let model = &cfg.model;
    let div = &cfg.divergence;
    let train_seed = derive_seed(seed, &[part::TRAIN]);
    let (fit, first): (TrainResult, Option<TrainResult>) = match &cfg.constraint {
        None => {
            let net = cfg.network.build(model, derive_seed(seed, &[part::INIT]))?;
            (train(net, model, div, &cfg.train_config(), None, train_seed)?, None)
        }
        Some(c) => {
            let net1 = cfg.constrained_block().build(model, derive_seed(seed, &[part::INIT_CONSTRAINED]))?;
            let tc1 = cfg.constrained_train_config();
            match (c.target, c.pipeline) {
                (Some(b), _) => {
                    metrics.constraint_target = Some(b);
                    let spec = ConstraintSpec::single(c.function.clone(), b);
                    (train(net1, model, div, &tc1, Some(&spec), train_seed)?, None)
                }
                (None, Some(source)) => {
                    let tc0 = cfg.train_config();
                    let stage0 = match source {
                        ConstantSource::FittedPrior { .. } => {
                            Some((cfg.network.build(model, derive_seed(seed, &[part::INIT]))?, &tc0))
                        }
                        ConstantSource::LogUniformJeffreys { .. } => None,
                    };
                    let res = constrained_pipeline(model, div, &c.function, source, stage0, (net1, &tc1), train_seed)?;
                    metrics.constants = Some(res.constants);
                    metrics.constraint_target = Some(res.constants.target);
                    (res.constrained, res.unconstrained)
                }
                (None, None) => return Err(Error::config("constraint", "one of `target` or `pipeline` is required")),
            }
        }
    };
    metrics.clamped_log_ratios = fit.clamped + first.as_ref().map_or(0, |f| f.clamped);
    if let Some(last) = fit.trace.last() {
        metrics.mi_final = Some(MiSummary {
            epoch: last.epoch,
            mean: last.mi_mean,
            lo95: last.mi_lo95,
            hi95: last.mi_hi95,
            se: last.mi_se,
        });
        let all = fit.trace.iter().chain(first.iter().flat_map(|f| f.trace.iter()));
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.mi_mean + 3.0 * r.mi_se), hi.max(r.mi_mean - 3.0 * r.mi_se))
        });
        metrics.mi_trace_band = Some([lo, hi]);
    }
    if cfg.constraint.is_some() {
        metrics.constraint_gap = fit.final_update_gap();
    }
    if let Some(d) = dir {
        std::fs::write(d.join("network.json"), fit.net.to_json())?;
        write_trace(&d.join("mi_trace.csv"), &fit.trace)?;
        if cfg.constraint.is_some() {
            write_multipliers(&d.join("multiplier_trace.csv"), &fit.multiplier_trace)?;
        }
        if let Some(f) = &first {
            std::fs::write(d.join("network_unconstrained.json"), f.net.to_json())?;
            write_trace(&d.join("mi_trace_unconstrained.csv"), &f.trace)?;
        }
    }
    Ok(fit.net)
}

fn prior_stage(cfg: &ExperimentConfig, net: &PriorNetwork, dir: Option<&Path>, metrics: &mut Metrics) -> Result<Vec<Vec<f64>>> {
    let seed = cfg.seed;
    let ev = &cfg.evaluation;
    let prior_samples = net.sample_prior(ev.prior_samples, derive_seed(seed, &[part::PRIOR_SAMPLES]));
    if let Some(d) = dir {
        write_samples(&d.join("prior_samples.csv"), &prior_samples)?;
    }
    if ev.metrics.contains(&Metric::PriorMmd) {
        let reference = sample_dirichlet(
            &evaluation::multinomial_jeffreys_prior(cfg.model.param_dim()),
            ev.prior_samples,
            derive_seed(seed, &[part::REFERENCE, 0]),
        )?;
        metrics.prior_mmd2 = Some(mmd_metric(&prior_samples, &reference, cfg, derive_seed(seed, &[part::NULL, 0]))?);
    }
    if ev.metrics.contains(&Metric::PriorKs) {
        if let Some((a, alpha)) = constraint_log_factor(cfg) {
            let target = evaluation::log_uniform_constrained_prior(&a, alpha)?;
            let xs: Vec<f64> = prior_samples.iter().map(|t| t[a.component()]).collect();
            metrics.prior_ks = Some(evaluation::ks_distance(&xs, |x| target.cdf(x))?);
        } else {
            metrics.notes.push("prior_ks needs an α-divergence constraint; skipped".into());
        }
    }
    Ok(prior_samples)
}

/// Posterior part of a run for a given network and dataset.
#[derive(Debug, Clone)]
pub struct PosteriorOutcome {
    pub chain: MhOutput,
    /// Thinned fitted posterior used for the metrics.
    pub fitted: Vec<Vec<f64>>,
    pub reference: Option<Vec<Vec<f64>>>,
}

/// Cache for the tabulated probit Jeffreys prior, which only depends on the
/// model and grid settings.
#[derive(Debug, Default)]
pub struct GridCache(Option<JeffreysGrid>);

impl GridCache {
    pub fn with(grid: JeffreysGrid) -> Self {
        Self(Some(grid))
    }

    pub fn into_inner(self) -> Option<JeffreysGrid> {
        self.0
    }

    fn get(&mut self, cfg: &ExperimentConfig, metrics: &mut Metrics) -> Result<&JeffreysGrid> {
        if self.0.is_none() {
            let grid = probit_jeffreys_grid(&cfg.model, &cfg.evaluation.jeffreys_grid, cfg.threads)?;
            if grid.unconverged > 0 {
                metrics
                    .notes
                    .push(format!("{} Jeffreys grid nodes failed the quadrature refinement check", grid.unconverged));
            }
            self.0 = Some(grid);
        }
        Ok(self.0.as_ref().expect("grid computed above"))
    }
}

fn reference_posterior(
    cfg: &ExperimentConfig,
    x: &DataSet,
    seed: u64,
    dir: Option<&Path>,
    grid_cache: &mut GridCache,
    metrics: &mut Metrics,
) -> Result<Option<Vec<Vec<f64>>>> {
    let model = &cfg.model;
    let ev = &cfg.evaluation;
    let Some(pb) = &cfg.posterior else { return Ok(None) };
    let ref_seed = derive_seed(seed, &[part::REFERENCE, 1]);
    let samples = match model {
        ModelSpec::Multinomial { .. } if cfg.constraint.is_none() => {
            let g = evaluation::multinomial_jeffreys_posterior(x)?;
            sample_dirichlet(&g, ev.posterior_samples, ref_seed)?
        }
        ModelSpec::GaussVar { .. } if cfg.constraint.is_none() => {
            let ig = gaussvar_jeffreys_posterior(model, x)?;
            ig.sample(ev.posterior_samples, ref_seed).into_iter().map(|v| vec![v]).collect()
        }
        ModelSpec::GaussVar { .. } => {
            let Some((a, alpha)) = constraint_log_factor(cfg) else { return Ok(None) };
            let rmh = pb.reference_mh.clone().unwrap_or_default();
            let ig = gaussvar_jeffreys_posterior(model, x)?;
            let chain = mh_theta_with_prior(
                |t| -t[0].ln() + a.eval_scalar(t[0]).ln() / alpha,
                None,
                model,
                x,
                &[ig.scale / ig.shape],
                &rmh,
                ref_seed,
            )?;
            metrics.reference_acceptance = Some(acceptance(&chain.diagnostics));
            thin(&chain.theta_samples, ev.posterior_samples)
        }
        ModelSpec::Probit { .. } => {
            let factor = constraint_log_factor(cfg);
            let grid = grid_cache.get(cfg, metrics)?;
            if let Some(d) = dir {
                grid.write_csv(&d.join("jeffreys_grid.csv"))?;
            }
            let rmh = pb.reference_mh.clone().unwrap_or(MhConfig {
                total_iters: 50_000,
                keep_last: 25_000,
                ..Default::default()
            });
            let chain = match factor {
                None => mh_theta_reference(grid, model, x, &rmh, ref_seed)?,
                Some((a, alpha)) => {
                    let stats = x.stats(model)?;
                    let prior = |t: &[f64]| grid.log_density_at(t) + a.eval(t).ln() / alpha;
                    let mut best = (f64::NEG_INFINITY, vec![1.0, 1.0]);
                    for u in grid.log_theta1.iter().step_by(5) {
                        for v in grid.log_theta2.iter().step_by(5) {
                            let t = vec![u.exp(), v.exp()];
                            let l = prior(&t) + model.log_lik_stats(&stats, &t);
                            if l > best.0 {
                                best = (l, t);
                            }
                        }
                    }
                    let bounds = grid.log_bounds();
                    mh_theta_with_prior(prior, Some(&bounds[..]), model, x, &best.1, &rmh, ref_seed)?
                }
            };
            metrics.reference_acceptance = Some(acceptance(&chain.diagnostics));
            metrics.notes.extend(chain.diagnostics.warnings.iter().map(|w| format!("reference chain: {w}")));
            thin(&chain.theta_samples, ev.posterior_samples)
        }
        _ => return Ok(None),
    };
    Ok(Some(samples))
}

/// Sample the fitted posterior for `x` and compare it with the reference.
/// `seed` drives the chains; `theta_true` enables the mean-norm metric.
#[allow(clippy::too_many_arguments)]
pub fn posterior_stage(
    cfg: &ExperimentConfig,
    net: &PriorNetwork,
    x: &DataSet,
    theta_true: Option<&[f64]>,
    seed: u64,
    dir: Option<&Path>,
    grid_cache: &mut GridCache,
    metrics: &mut Metrics,
) -> Result<PosteriorOutcome> {
    let model = &cfg.model;
    let ev = &cfg.evaluation;
    let pb = cfg
        .posterior
        .as_ref()
        .ok_or_else(|| Error::config("posterior", "a posterior block is required"))?;
    let mut mh = pb.mh.clone();
    if mh.covariance.is_none() && matches!(net.head(), OutputHead::Softmax) && pb.proposal_correlation > 0.0 {
        mh.covariance = Some(softmax_proposal_covariance(net.latent_dim(), pb.proposal_correlation));
    }
    let chain = mh_run(net, model, x, &mh, derive_seed(seed, &[part::POSTERIOR]))?;
    metrics.acceptance = Some(acceptance(&chain.diagnostics));
    metrics.autocorrelation = chain.diagnostics.autocorrelation;
    metrics.notes.extend(chain.diagnostics.warnings.iter().cloned());
    if let Some(d) = dir {
        write_chain_csv(&d.join("posterior_chain.csv"), &chain)?;
    }
    let fitted = thin(&chain.theta_samples, ev.posterior_samples);

    let wants_reference = ev.metrics.contains(&Metric::PosteriorMmd) || ev.metrics.contains(&Metric::MeanNormError);
    let reference = if wants_reference {
        reference_posterior(cfg, x, seed, dir, grid_cache, metrics)?
    } else {
        None
    };
    if let (Some(r), Some(d)) = (&reference, dir) {
        write_samples(&d.join("reference_posterior.csv"), r)?;
    }
    if ev.metrics.contains(&Metric::PosteriorMmd) {
        match &reference {
            Some(r) => metrics.posterior_mmd2 = Some(mmd_metric(&fitted, r, cfg, derive_seed(seed, &[part::NULL, 1]))?),
            None => metrics.notes.push("no reference posterior for this setting; posterior_mmd skipped".into()),
        }
    }
    if ev.metrics.contains(&Metric::PosteriorKs) {
        let xs: Vec<f64> = fitted.iter().map(|t| t[0]).collect();
        let ig = gaussvar_jeffreys_posterior(model, x)?;
        let ks = match constraint_log_factor(cfg) {
            None => evaluation::ks_distance(&xs, |v| ig.cdf(v))?,
            Some((a, alpha)) => {
                let cdf = TabulatedCdf::from_log_density(
                    |u| {
                        let t = u.exp();
                        a.eval_scalar(t).ln() / alpha + ig.pdf(t).ln() + u
                    },
                    -30.0,
                    30.0,
                    200_001,
                )?;
                evaluation::ks_distance(&xs, |v| cdf.cdf(v))?
            }
        };
        metrics.posterior_ks = Some(ks);
    }
    if let (true, Some(t)) = (ev.metrics.contains(&Metric::MeanNormError), theta_true) {
        metrics.mean_norm_error = Some(evaluation::mean_norm_error(&fitted, t)?);
        if let Some(r) = &reference {
            metrics.reference_mean_norm_error = Some(evaluation::mean_norm_error(r, t)?);
        }
    }
    Ok(PosteriorOutcome {
        chain,
        fitted,
        reference,
    })
}

fn new_metrics(cfg: &ExperimentConfig) -> Metrics {
    Metrics {
        experiment: cfg.name.clone().unwrap_or_else(|| cfg.model.name().to_string()),
        seed: cfg.seed,
        ..Default::default()
    }
}

/// Train a network, or reuse `net`, then run the prior and posterior parts.
/// Artifacts go under `dir` (which must exist) when given.
pub fn execute_with(cfg: &ExperimentConfig, net: Option<PriorNetwork>, dir: Option<&Path>) -> Result<Outcome> {
    let mut metrics = new_metrics(cfg);
    let net = match net {
        Some(n) => n,
        None => train_stage(cfg, dir, &mut metrics)?,
    };
    let prior_samples = prior_stage(cfg, &net, dir, &mut metrics)?;
    let mut posterior = None;
    let mut reference_posterior = None;
    let mut data = None;
    let mut cache = GridCache::default();
    if let Some(pb) = &cfg.posterior {
        let x = dataset(cfg, &pb.data)?;
        if let Some(d) = dir {
            x.write_csv(&d.join("data.csv"))?;
        }
        let theta_true = match &pb.data {
            DataSource::Simulate { theta_true, .. } => Some(theta_true.as_slice()),
            DataSource::File { .. } => None,
        };
        let out = posterior_stage(cfg, &net, &x, theta_true, cfg.seed, dir, &mut cache, &mut metrics)?;
        posterior = Some(out.chain);
        reference_posterior = out.reference;
        data = Some(x);
    }
    if let Some(d) = dir {
        write_metrics(&d.join("metrics.json"), &metrics)?;
    }
    Ok(Outcome {
        metrics,
        net,
        prior_samples,
        posterior,
        reference_posterior,
        data,
        grid: cache.0,
    })
}

pub fn execute(cfg: &ExperimentConfig, dir: Option<&Path>) -> Result<Outcome> {
    execute_with(cfg, None, dir)
}

pub fn write_metrics(path: &Path, metrics: &Metrics) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(metrics)? + "\n")?;
    Ok(())
}

/// Overrides from the command line or environment.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Environment variable that overrides the config seed when `--seed` is
/// not given.
pub const SEED_ENV: &str = "VARP_SEED";

impl RunOptions {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        } else if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::config("seed", format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        }
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(Error::config("threads", "must be at least 1"));
            }
            cfg.threads = t;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = Some(o.clone());
        }
        Ok(())
    }
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(cfg.name.clone().unwrap_or_else(|| cfg.model.name().to_string())))
}

/// Run `body` in a scratch directory next to `out` and move it into place
/// on success; the scratch directory is removed on failure.
pub fn with_staging<T>(out: &Path, body: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent)?;
    let stem = out.file_name().map_or("run".into(), |s| s.to_string_lossy().into_owned());
    let staging = parent.join(format!(".{stem}.partial-{}", std::process::id()));
    if staging.exists() {
        std::fs::remove_dir_all(&staging)?;
    }
    std::fs::create_dir(&staging)?;
    let result = body(&staging);
    match result {
        Ok(v) => {
            if out.exists() {
                let previous_run = out.join("manifest.json").exists();
                let empty = std::fs::read_dir(out)?.next().is_none();
                if previous_run {
                    std::fs::remove_dir_all(out)?;
                } else if empty {
                    std::fs::remove_dir(out)?;
                } else {
                    let _ = std::fs::remove_dir_all(&staging);
                    return Err(Error::config(
                        "output_dir",
                        format!("{} exists and does not hold a previous run", out.display()),
                    ));
                }
            }
            std::fs::rename(&staging, out)?;
            Ok(v)
        }
        Err(e) => {
            let _ = std::fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

pub fn list_files(dir: &Path) -> Result<Vec<String>> {
    let mut files: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    Ok(files)
}

pub fn write_manifest(dir: &Path, cfg: &ExperimentConfig, net: Option<&PriorNetwork>, notes: Vec<String>) -> Result<()> {
    let mut files = list_files(dir)?;
    files.push("manifest.json".into());
    files.sort();
    let m = Manifest {
        name: cfg.name.clone().unwrap_or_else(|| cfg.model.name().to_string()),
        seed: cfg.seed,
        threads: cfg.threads,
        epochs: cfg.optimizer.epochs,
        config: cfg.clone(),
        network_checksum: net.map_or(String::new(), |n| checksum(n.params())),
        files,
        notes,
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(())
}

/// Run a parsed config and write its artifact directory.
pub fn run_config(cfg: &ExperimentConfig) -> Result<(PathBuf, Outcome)> {
    cfg.validate()?;
    let out = output_dir(cfg);
    let outcome = with_staging(&out, |dir| {
        let outcome = execute(cfg, Some(dir))?;
        let mut notes = Vec::new();
        if let (ModelSpec::Probit { .. }, Some(DataSource::Simulate { .. })) =
            (&cfg.model, cfg.posterior.as_ref().map(|p| &p.data))
        {
            notes.push("probit θ_true is pinned to a value close to the published one".into());
        }
        write_manifest(dir, cfg, Some(&outcome.net), notes)?;
        Ok(outcome)
    })?;
    Ok((out, outcome))
}

/// `run <config>`: parse, apply overrides, execute.
pub fn run(config_path: &Path, opts: &RunOptions) -> Result<PathBuf> {
    let mut cfg = ExperimentConfig::from_path(config_path)?;
    opts.apply(&mut cfg)?;
    Ok(run_config(&cfg)?.0)
}

/// `validate-config <config>`.
pub fn validate_config(config_path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_path(config_path)
}
