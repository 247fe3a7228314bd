//! Experiment configuration: a TOML document with one section per stage.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::divergences::DivergenceSpec;
use crate::error::{Error, Result};
use crate::evaluation::GridConfig;
use crate::objectives::EstimatorConfig;
use crate::optimizer::{AdamConfig, ConstantSource, ConstraintFn, LagrangianConfig, TrainConfig};
use crate::posterior_mh::MhConfig;
use crate::pushforward::{Architecture, InitConfig, OutputHead, PriorNetwork};
use crate::stat_models::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[serde(default = "one")]
    pub threads: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub model: ModelSpec,
    pub network: NetworkBlock,
    /// Network for the constrained stage of the pipeline; defaults to
    /// `network`.
    #[serde(default)]
    pub constrained_network: Option<NetworkBlock>,
    pub divergence: DivergenceSpec,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub optimizer: OptimizerBlock,
    #[serde(default)]
    pub constraint: Option<ConstraintBlock>,
    #[serde(default)]
    pub posterior: Option<PosteriorBlock>,
    #[serde(default)]
    pub evaluation: EvaluationBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
}

fn default_seed() -> u64 {
    1
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkBlock {
    #[serde(default = "single_layer")]
    pub architecture: Architecture,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    pub head: OutputHead,
    #[serde(default)]
    pub init: InitConfig,
}

fn single_layer() -> Architecture {
    Architecture::SingleLayer
}

fn default_latent_dim() -> usize {
    50
}

impl NetworkBlock {
    pub fn build(&self, model: &ModelSpec, seed: u64) -> Result<PriorNetwork> {
        PriorNetwork::init(
            self.architecture,
            self.head.clone(),
            self.latent_dim,
            model.param_dim(),
            self.init,
            seed,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerBlock {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Epochs between MI estimates in the trace (0 disables).
    pub monitor_every: usize,
    pub lagrangian: LagrangianConfig,
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        let a = AdamConfig::default();
        Self {
            epochs: 2000,
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            monitor_every: 10,
            lagrangian: LagrangianConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintBlock {
    pub function: ConstraintFn,
    /// Fixed target `b`. When absent, `b = ĉ/K̂` comes from `pipeline`.
    #[serde(default)]
    pub target: Option<f64>,
    #[serde(default)]
    pub pipeline: Option<ConstantSource>,
    /// Epochs of the constrained stage; defaults to `optimizer.epochs`.
    #[serde(default)]
    pub epochs: Option<usize>,
    /// Learning rate of the constrained stage; defaults to `optimizer.lr`.
    #[serde(default)]
    pub lr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DataSource {
    Simulate { theta_true: Vec<f64>, n_obs: usize, seed: u64 },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorBlock {
    pub data: DataSource,
    #[serde(default)]
    pub mh: MhConfig,
    /// `ρ` of the `I − (ρ/p)11ᵀ` proposal used with a Softmax head when
    /// `mh.covariance` is not given.
    #[serde(default = "default_rho")]
    pub proposal_correlation: f64,
    /// MH(θ) reference chain, for models without a closed-form posterior.
    #[serde(default)]
    pub reference_mh: Option<MhConfig>,
}

fn default_rho() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Last MI estimate of the trace.
    MiFinal,
    /// MMD² of the fitted prior against the known Jeffreys prior.
    PriorMmd,
    /// MMD² of the fitted posterior against the reference posterior.
    PosteriorMmd,
    /// KS distance of the fitted prior (first component) to the target prior.
    PriorKs,
    /// KS distance of the fitted posterior (first component) to the
    /// reference posterior.
    PosteriorKs,
    ConstraintGap,
    MeanNormError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationBlock {
    pub metrics: Vec<Metric>,
    /// Prior draws saved and compared.
    pub prior_samples: usize,
    /// Posterior draws compared (evenly thinned from the kept window).
    pub posterior_samples: usize,
    pub null_permutations: usize,
    /// Rows per sample used for the permutation null.
    pub null_rows: usize,
    /// Grid for the tabulated probit Jeffreys prior.
    pub jeffreys_grid: GridConfig,
}

impl Default for EvaluationBlock {
    fn default() -> Self {
        Self {
            metrics: vec![Metric::MiFinal],
            prior_samples: 20_000,
            posterior_samples: 20_000,
            null_permutations: 100,
            null_rows: 1000,
            jeffreys_grid: GridConfig::default(),
        }
    }
}

/// Parameters of the reproduction sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub alphas: Vec<f64>,
    pub latent_dims: Vec<usize>,
    /// Hidden width of the two-layer variant in the latent-dimension sweep.
    pub hidden_dim: usize,
    pub seeds: usize,
    pub n_values: Vec<usize>,
    pub datasets_per_n: usize,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            alphas: vec![0.1, 0.25, 0.5, 0.75, 0.9],
            latent_dims: vec![25, 50, 75, 100, 200],
            hidden_dim: 50,
            seeds: 100,
            n_values: vec![5, 10, 20, 50, 100],
            datasets_per_n: 10,
        }
    }
}

impl ExperimentConfig {
    /// Parse and validate a TOML document. Errors carry the field path.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("", e.message().to_string()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::config(if path == "." { String::new() } else { path }, inner.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn constrained_block(&self) -> &NetworkBlock {
        self.constrained_network.as_ref().unwrap_or(&self.network)
    }

    pub fn train_config(&self) -> TrainConfig {
        let o = &self.optimizer;
        TrainConfig {
            epochs: o.epochs,
            adam: AdamConfig {
                lr: o.lr,
                beta1: o.beta1,
                beta2: o.beta2,
                eps: o.eps,
            },
            estimator: EstimatorConfig {
                threads: self.threads,
                ..self.estimator
            },
            monitor_every: o.monitor_every,
            lagrangian: o.lagrangian,
        }
    }

    pub fn constrained_train_config(&self) -> TrainConfig {
        let mut t = self.train_config();
        if let Some(c) = &self.constraint {
            t.epochs = c.epochs.unwrap_or(t.epochs);
            t.adam.lr = c.lr.unwrap_or(t.adam.lr);
        }
        t
    }

    /// Cross-field checks.
    pub fn validate(&self) -> Result<()> {
        fn wrap(path: &str) -> impl Fn(Error) -> Error + '_ {
            move |e| Error::config(path, e.to_string())
        }
        self.model.validate().map_err(wrap("model"))?;
        if self.threads == 0 {
            return Err(Error::config("threads", "must be at least 1"));
        }
        let q = self.model.param_dim();
        for (path, block) in [("network", Some(&self.network)), ("constrained_network", self.constrained_network.as_ref())] {
            let Some(b) = block else { continue };
            if b.latent_dim == 0 {
                return Err(Error::config(format!("{path}.latent_dim"), "must be positive"));
            }
            match (&b.head, &self.model) {
                (OutputHead::Softmax, ModelSpec::Multinomial { .. }) => {}
                (OutputHead::Softmax, _) => {
                    return Err(Error::config(format!("{path}.head"), "a Softmax head needs a multinomial model"));
                }
                (OutputHead::Componentwise(a), _) if a.len() != q => {
                    return Err(Error::config(
                        format!("{path}.head"),
                        format!("{} activations for a {q}-dimensional parameter", a.len()),
                    ));
                }
                _ => {}
            }
            b.build(&self.model, 0).map_err(wrap(path))?;
        }
        self.divergence.validate().map_err(wrap("divergence"))?;
        self.train_config().estimator.validate().map_err(wrap("estimator"))?;
        self.train_config().adam.validate().map_err(wrap("optimizer"))?;
        if let Some(c) = &self.constraint {
            c.function.validate(q).map_err(wrap("constraint.function"))?;
            self.optimizer.lagrangian.validate().map_err(wrap("optimizer.lagrangian"))?;
            match (c.target, &c.pipeline) {
                (Some(_), Some(_)) => {
                    return Err(Error::config("constraint", "give either `target` or `pipeline`, not both"));
                }
                (None, None) => return Err(Error::config("constraint", "one of `target` or `pipeline` is required")),
                (None, Some(_)) if !matches!(self.divergence, DivergenceSpec::Alpha { .. }) => {
                    return Err(Error::config("divergence", "the constrained pipeline needs an α-divergence"));
                }
                _ => {}
            }
            if let Some(lr) = c.lr {
                AdamConfig::with_lr(lr).validate().map_err(wrap("constraint.lr"))?;
            }
        } else if self.constrained_network.is_some() {
            return Err(Error::config("constrained_network", "only used with a [constraint] section"));
        }
        if let Some(p) = &self.posterior {
            let dim = self.constrained_block().latent_dim;
            p.mh.validate(dim).map_err(wrap("posterior.mh"))?;
            if let Some(r) = &p.reference_mh {
                r.validate(q).map_err(wrap("posterior.reference_mh"))?;
            }
            if !(p.proposal_correlation >= 0.0 && p.proposal_correlation < 1.0) {
                return Err(Error::config("posterior.proposal_correlation", "must be in [0, 1)"));
            }
            if let DataSource::Simulate { theta_true, n_obs, .. } = &p.data {
                self.model.check_theta(theta_true).map_err(wrap("posterior.data.theta_true"))?;
                if *n_obs == 0 {
                    return Err(Error::config("posterior.data.n_obs", "must be positive"));
                }
            }
        }
        let ev = &self.evaluation;
        let alpha_constraint = self.constraint.is_some() && matches!(self.divergence, DivergenceSpec::Alpha { .. });
        for m in &ev.metrics {
            let ok = match m {
                Metric::MiFinal => self.optimizer.monitor_every > 0,
                Metric::PriorMmd => matches!(self.model, ModelSpec::Multinomial { .. }) && self.constraint.is_none(),
                Metric::PosteriorMmd => self.posterior.is_some() && self.has_reference_posterior(),
                Metric::PriorKs => alpha_constraint && matches!(self.model, ModelSpec::GaussVar { .. }),
                Metric::PosteriorKs => {
                    self.posterior.is_some()
                        && matches!(self.model, ModelSpec::GaussVar { .. })
                        && (self.constraint.is_none() || alpha_constraint)
                }
                Metric::ConstraintGap => self.constraint.is_some(),
                Metric::MeanNormError => matches!(&self.posterior, Some(PosteriorBlock { data: DataSource::Simulate { .. }, .. })),
            };
            if !ok {
                return Err(Error::config(
                    "evaluation.metrics",
                    format!("metric `{}` does not apply to this experiment", metric_name(*m)),
                ));
            }
        }
        if ev.prior_samples < 100 || ev.posterior_samples < 2 || ev.null_rows < 2 {
            return Err(Error::config("evaluation", "sample counts too small"));
        }
        Ok(())
    }
}

impl ExperimentConfig {
    /// Whether a reference posterior exists: the known Jeffreys posterior,
    /// or its reshaping by `a^{1/α}` under an α-divergence constraint.
    pub fn has_reference_posterior(&self) -> bool {
        let alpha = matches!(self.divergence, DivergenceSpec::Alpha { .. });
        match (&self.model, &self.constraint) {
            (ModelSpec::Multinomial { .. }, None) => true,
            (ModelSpec::GaussVar { .. } | ModelSpec::Probit { .. }, None) => true,
            (ModelSpec::GaussVar { .. } | ModelSpec::Probit { .. }, Some(_)) => alpha,
            _ => false,
        }
    }
}

pub fn metric_name(m: Metric) -> String {
    serde_json::to_value(m).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [model]
        kind = "gauss_var"
        mu = 0.0

        [network]
        head = { kind = "componentwise", activations = ["exp"] }

        [divergence]
        kind = "alpha"
        alpha = 0.5
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.seed, 1);
        assert_eq!(c.network.latent_dim, 50);
        assert_eq!(c.estimator.t, 50);
        assert_eq!(c.divergence, DivergenceSpec::Alpha { alpha: 0.5, stabilized: true });
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn errors_carry_field_paths() {
        let missing = MINIMAL.replace("[model]\n        kind = \"gauss_var\"\n        mu = 0.0", "");
        match ExperimentConfig::from_toml(&missing) {
            Err(Error::Config { message, .. }) => assert!(message.contains("model"), "{message}"),
            other => panic!("{other:?}"),
        }
        let bad = format!("{MINIMAL}\n[estimator]\nt = \"many\"\n");
        match ExperimentConfig::from_toml(&bad) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "estimator.t"),
            other => panic!("{other:?}"),
        }
        let wrong_head = MINIMAL.replace("[\"exp\"]", "[\"exp\", \"exp\"]");
        match ExperimentConfig::from_toml(&wrong_head) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "network.head"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pipeline_requires_alpha() {
        let text = MINIMAL.replace("kind = \"alpha\"\n        alpha = 0.5", "kind = \"kl\"")
            + "\n[constraint]\nfunction = { kind = \"rational\", beta = -1.0, tau = 1.0 }\npipeline = { kind = \"log_uniform_jeffreys\", samples = 1000 }\n";
        match ExperimentConfig::from_toml(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "divergence"),
            other => panic!("{other:?}"),
        }
    }
}
