//! Implicit priors `θ = g(λ, ε)` with a standard Gaussian latent input.
//!
//! A [`PriorNetwork`] owns a flat parameter vector `λ` and an architecture
//! descriptor. The layout of `λ` is fixed per architecture:
//!
//! * single layer: `W (q×p, row-major)`, `b (q)`
//! * two layers with PReLU: `W₁ (h×p)`, `b₁ (h)`, `W₂ (q×h)`, `b₂ (q)`, `ζ`
//!
//! Parameter Jacobians are exact closed forms; they are exposed both as a
//! dense `q × L` matrix and as vector-Jacobian products, which is what the
//! gradient estimators consume.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::special::{log_norm_pdf, sigmoid, softplus, LN_SQRT_2PI};

/// Standard multivariate normal latent distribution `N(0, I_p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentSpec {
    dim: usize,
}

impl LatentSpec {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("latent dimension must be at least 1"));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `count` i.i.d. rows, deterministic in `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng::rng_from_seed(seed);
        (0..count).map(|_| self.draw(&mut rng)).collect()
    }

    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim).map(|_| StandardNormal.sample(rng)).collect()
    }

    pub fn log_density(&self, eps: &[f64]) -> f64 {
        eps.iter().map(|&e| log_norm_pdf(e)).sum()
    }
}

/// Elementwise output activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Exp,
    Softplus,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Exp => z.exp(),
            Activation::Softplus => softplus(z),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64, out: f64) -> f64 {
        match self {
            Activation::Exp => out,
            Activation::Softplus => sigmoid(z),
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Identity => 1.0,
        }
    }
}

/// Activation applied to the last affine layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "activations")]
pub enum OutputHead {
    /// Softmax over all outputs followed by the affine guard
    /// `θ ← (1 − qδ)θ + δ`.
    Softmax,
    /// One activation per output coordinate.
    Componentwise(Vec<Activation>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Architecture {
    SingleLayer,
    TwoLayerPrelu { hidden_dim: usize },
}

/// Initialisation knobs. Defaults: weights `N(0, 0.05²)`, zero biases,
/// PReLU slope 0.25 and Softmax guard 1e-6.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    pub weight_std: f64,
    pub zeta0: f64,
    pub delta: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            weight_std: 0.05,
            zeta0: 0.25,
            delta: 1e-6,
        }
    }
}

/// Smallest PReLU slope kept after an optimiser step.
pub const MIN_PRELU_SLOPE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PriorNetwork {
    arch: Architecture,
    head: OutputHead,
    latent: LatentSpec,
    q: usize,
    params: Vec<f64>,
    delta: f64,
}

/// Intermediate values of one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Hidden pre-activation (two-layer only).
    pub hidden_pre: Vec<f64>,
    /// Hidden activation (two-layer only).
    pub hidden: Vec<f64>,
    /// Output pre-activation.
    pub pre: Vec<f64>,
    /// Network output θ.
    pub theta: Vec<f64>,
    /// Softmax probabilities before the guard.
    softmax: Vec<f64>,
}

/// Dense `q × L` parameter Jacobian, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamJacobian {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ParamJacobian {
    pub fn get(&self, j: usize, l: usize) -> f64 {
        self.data[j * self.cols + l]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }
}

fn param_count(arch: Architecture, p: usize, q: usize) -> usize {
    match arch {
        Architecture::SingleLayer => q * p + q,
        Architecture::TwoLayerPrelu { hidden_dim: h } => h * p + h + q * h + q + 1,
    }
}

impl PriorNetwork {
    /// Randomly initialised network.
    pub fn init(
        arch: Architecture,
        head: OutputHead,
        latent_dim: usize,
        q: usize,
        init: InitConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut net = Self::zeros(arch, head, latent_dim, q, init.delta)?;
        let mut rng = rng::stream(seed, rng::tags::INIT, 0);
        let p = latent_dim;
        let mut fill = |range: std::ops::Range<usize>, params: &mut Vec<f64>| {
            for v in &mut params[range] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = init.weight_std * z;
            }
        };
        match arch {
            Architecture::SingleLayer => fill(0..q * p, &mut net.params),
            Architecture::TwoLayerPrelu { hidden_dim: h } => {
                fill(0..h * p, &mut net.params);
                let w2 = h * p + h;
                fill(w2..w2 + q * h, &mut net.params);
                let last = net.params.len() - 1;
                net.params[last] = init.zeta0;
            }
        }
        net.validate()?;
        Ok(net)
    }

    /// Network with all parameters zero (PReLU slope set to 0.25).
    pub fn zeros(
        arch: Architecture,
        head: OutputHead,
        latent_dim: usize,
        q: usize,
        delta: f64,
    ) -> Result<Self> {
        let latent = LatentSpec::new(latent_dim)?;
        let len = param_count(arch, latent_dim, q);
        let mut params = vec![0.0; len];
        if let Architecture::TwoLayerPrelu { .. } = arch {
            params[len - 1] = InitConfig::default().zeta0;
        }
        let net = Self {
            arch,
            head,
            latent,
            q,
            params,
            delta,
        };
        net.validate()?;
        Ok(net)
    }

    /// Network with explicit parameters in the documented flat layout.
    pub fn from_params(
        arch: Architecture,
        head: OutputHead,
        latent_dim: usize,
        q: usize,
        delta: f64,
        params: Vec<f64>,
    ) -> Result<Self> {
        let latent = LatentSpec::new(latent_dim)?;
        let expected = param_count(arch, latent_dim, q);
        if params.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        let net = Self {
            arch,
            head,
            latent,
            q,
            params,
            delta,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::invalid("output dimension must be at least 1"));
        }
        if let Architecture::TwoLayerPrelu { hidden_dim } = self.arch {
            if hidden_dim == 0 {
                return Err(Error::invalid("hidden dimension must be at least 1"));
            }
            if !(self.zeta() > 0.0) {
                return Err(Error::invalid("PReLU slope must be positive"));
            }
        }
        match &self.head {
            OutputHead::Softmax => {
                if self.q < 2 {
                    return Err(Error::invalid("softmax head needs q >= 2"));
                }
                if !(self.delta >= 0.0) || self.delta * self.q as f64 >= 1.0 {
                    return Err(Error::invalid("softmax guard must satisfy 0 <= qδ < 1"));
                }
            }
            OutputHead::Componentwise(acts) => {
                if acts.len() != self.q {
                    return Err(Error::Shape(format!(
                        "{} activations for {} outputs",
                        acts.len(),
                        self.q
                    )));
                }
            }
        }
        if self.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite network parameter"));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn head(&self) -> &OutputHead {
        &self.head
    }

    pub fn latent(&self) -> LatentSpec {
        self.latent
    }

    pub fn latent_dim(&self) -> usize {
        self.latent.dim
    }

    pub fn output_dim(&self) -> usize {
        self.q
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Replace `λ`; the PReLU slope is projected back to `[MIN_PRELU_SLOPE, ∞)`.
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        self.project();
        Ok(())
    }

    pub(crate) fn project(&mut self) {
        if let Architecture::TwoLayerPrelu { .. } = self.arch {
            let last = self.params.len() - 1;
            self.params[last] = self.params[last].max(MIN_PRELU_SLOPE);
        }
    }

    pub fn zeta(&self) -> f64 {
        match self.arch {
            Architecture::SingleLayer => f64::NAN,
            Architecture::TwoLayerPrelu { .. } => self.params[self.params.len() - 1],
        }
    }

    /// `(weight, bias)` slices of the output layer.
    fn output_layer(&self) -> (&[f64], &[f64], usize) {
        let (q, p) = (self.q, self.latent.dim);
        match self.arch {
            Architecture::SingleLayer => (&self.params[..q * p], &self.params[q * p..q * p + q], p),
            Architecture::TwoLayerPrelu { hidden_dim: h } => {
                let start = h * p + h;
                (
                    &self.params[start..start + q * h],
                    &self.params[start + q * h..start + q * h + q],
                    h,
                )
            }
        }
    }

    /// Weight row feeding output `j` and its bias (single-layer only).
    pub fn output_row(&self, j: usize) -> Option<(&[f64], f64)> {
        match self.arch {
            Architecture::SingleLayer => {
                let p = self.latent.dim;
                Some((&self.params[j * p..(j + 1) * p], self.params[self.q * p + j]))
            }
            Architecture::TwoLayerPrelu { .. } => None,
        }
    }

    /// `θ = g(λ, ε)`.
    pub fn forward(&self, eps: &[f64]) -> Result<Vec<f64>> {
        self.check_eps(eps)?;
        Ok(self.forward_pass(eps).theta)
    }

    fn check_eps(&self, eps: &[f64]) -> Result<()> {
        if eps.len() != self.latent.dim {
            return Err(Error::Shape(format!(
                "latent vector has length {}, expected {}",
                eps.len(),
                self.latent.dim
            )));
        }
        if eps.iter().any(|e| !e.is_finite()) {
            return Err(Error::domain("non-finite latent input"));
        }
        Ok(())
    }

    /// Full forward evaluation keeping intermediates; `eps` is assumed valid.
    pub fn forward_pass(&self, eps: &[f64]) -> ForwardPass {
        let p = self.latent.dim;
        let (hidden_pre, hidden) = match self.arch {
            Architecture::SingleLayer => (Vec::new(), Vec::new()),
            Architecture::TwoLayerPrelu { hidden_dim: h } => {
                let w1 = &self.params[..h * p];
                let b1 = &self.params[h * p..h * p + h];
                let zeta = self.zeta();
                let u: Vec<f64> = (0..h)
                    .map(|i| dot(&w1[i * p..(i + 1) * p], eps) + b1[i])
                    .collect();
                let r = u.iter().map(|&x| if x >= 0.0 { x } else { zeta * x }).collect();
                (u, r)
            }
        };
        let input: &[f64] = match self.arch {
            Architecture::SingleLayer => eps,
            Architecture::TwoLayerPrelu { .. } => &hidden,
        };
        let (w, b, width) = self.output_layer();
        let pre: Vec<f64> = (0..self.q)
            .map(|j| dot(&w[j * width..(j + 1) * width], input) + b[j])
            .collect();
        let (theta, softmax) = match &self.head {
            OutputHead::Softmax => {
                let s = softmax(&pre);
                let scale = 1.0 - self.q as f64 * self.delta;
                let theta = s.iter().map(|&v| scale * v + self.delta).collect();
                (theta, s)
            }
            OutputHead::Componentwise(acts) => (
                pre.iter().zip(acts).map(|(&z, a)| a.apply(z)).collect(),
                Vec::new(),
            ),
        };
        ForwardPass {
            hidden_pre,
            hidden,
            pre,
            theta,
            softmax,
        }
    }

    /// `∂θ_j/∂z_k` for the output pre-activation `z`, row-major `q × q`.
    fn head_jacobian(&self, pass: &ForwardPass) -> Vec<f64> {
        let q = self.q;
        let mut d = vec![0.0; q * q];
        match &self.head {
            OutputHead::Softmax => {
                let scale = 1.0 - q as f64 * self.delta;
                let s = &pass.softmax;
                for j in 0..q {
                    for k in 0..q {
                        let kron = if j == k { 1.0 } else { 0.0 };
                        d[j * q + k] = scale * s[j] * (kron - s[k]);
                    }
                }
            }
            OutputHead::Componentwise(acts) => {
                for j in 0..q {
                    d[j * q + j] = acts[j].derivative(pass.pre[j], pass.theta[j]);
                }
            }
        }
        d
    }

    /// Accumulate `scale · vᵀ ∂g/∂λ` into `out` (length `L`).
    pub fn accumulate_vjp(&self, pass: &ForwardPass, eps: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
        let (q, p) = (self.q, self.latent.dim);
        let d = self.head_jacobian(pass);
        // gradient w.r.t. output pre-activation
        let gz: Vec<f64> = (0..q)
            .map(|k| scale * (0..q).map(|j| v[j] * d[j * q + k]).sum::<f64>())
            .collect();
        match self.arch {
            Architecture::SingleLayer => {
                for k in 0..q {
                    if gz[k] == 0.0 {
                        continue;
                    }
                    let row = &mut out[k * p..(k + 1) * p];
                    for (o, e) in row.iter_mut().zip(eps) {
                        *o += gz[k] * e;
                    }
                    out[q * p + k] += gz[k];
                }
            }
            Architecture::TwoLayerPrelu { hidden_dim: h } => {
                let zeta = self.zeta();
                let w2_start = h * p + h;
                let b2_start = w2_start + q * h;
                let zeta_idx = b2_start + q;
                let w2 = &self.params[w2_start..b2_start];
                let mut gr = vec![0.0; h];
                for k in 0..q {
                    for i in 0..h {
                        out[w2_start + k * h + i] += gz[k] * pass.hidden[i];
                        gr[i] += gz[k] * w2[k * h + i];
                    }
                    out[b2_start + k] += gz[k];
                }
                for i in 0..h {
                    let u = pass.hidden_pre[i];
                    let gu = if u >= 0.0 {
                        gr[i]
                    } else {
                        out[zeta_idx] += gr[i] * u;
                        gr[i] * zeta
                    };
                    let row = &mut out[i * p..(i + 1) * p];
                    for (o, e) in row.iter_mut().zip(eps) {
                        *o += gu * e;
                    }
                    out[h * p + i] += gu;
                }
            }
        }
    }

    /// Exact `∂g_j/∂λ_l`.
    pub fn jacobian_params(&self, eps: &[f64]) -> Result<ParamJacobian> {
        self.check_eps(eps)?;
        let pass = self.forward_pass(eps);
        let cols = self.params.len();
        let mut data = vec![0.0; self.q * cols];
        let mut unit = vec![0.0; self.q];
        for j in 0..self.q {
            unit.iter_mut().for_each(|u| *u = 0.0);
            unit[j] = 1.0;
            self.accumulate_vjp(&pass, eps, &unit, 1.0, &mut data[j * cols..(j + 1) * cols]);
        }
        Ok(ParamJacobian {
            rows: self.q,
            cols,
            data,
        })
    }

    /// `count` prior draws `θ_i = g(λ, ε_i)`, deterministic in `seed`.
    pub fn sample_prior(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng::rng_from_seed(seed);
        (0..count)
            .map(|_| {
                let eps = self.latent.draw(&mut rng);
                self.forward_pass(&eps).theta
            })
            .collect()
    }

    /// Closed-form marginal density of output `component` at `value`.
    ///
    /// Available for single-layer componentwise heads with `exp`
    /// (log-normal) or `softplus` outputs. Returns `Ok(None)` otherwise,
    /// including the degenerate case of a zero weight row.
    pub fn analytic_marginal(&self, component: usize, value: f64) -> Result<Option<f64>> {
        if component >= self.q {
            return Err(Error::Shape(format!("component {component} out of range")));
        }
        let act = match (&self.arch, &self.head) {
            (Architecture::SingleLayer, OutputHead::Componentwise(acts)) => acts[component],
            _ => return Ok(None),
        };
        if !matches!(act, Activation::Exp | Activation::Softplus) {
            return Ok(None);
        }
        if !(value > 0.0) {
            return Err(Error::domain(format!("marginal density needs θ > 0, got {value}")));
        }
        let (w, b) = self.output_row(component).expect("single layer");
        let sigma = dot(w, w).sqrt();
        if sigma == 0.0 {
            return Ok(None);
        }
        let density = match act {
            Activation::Exp => {
                let z = (value.ln() - b) / sigma;
                (-0.5 * z * z - LN_SQRT_2PI).exp() / (sigma * value)
            }
            Activation::Softplus => {
                // z = log(e^θ − 1), dz/dθ = 1 / (1 − e^{−θ})
                let z = value.exp_m1().ln();
                let dz = 1.0 / (-(-value).exp_m1());
                let u = (z - b) / sigma;
                (-0.5 * u * u - LN_SQRT_2PI).exp() * dz / sigma
            }
            _ => unreachable!(),
        };
        Ok(Some(density))
    }

    pub fn to_document(&self) -> NetworkDocument {
        let (q, p) = (self.q, self.latent.dim);
        let (weights, biases, hidden_dim, zeta) = match self.arch {
            Architecture::SingleLayer => (
                vec![self.params[..q * p].to_vec()],
                vec![self.params[q * p..].to_vec()],
                None,
                None,
            ),
            Architecture::TwoLayerPrelu { hidden_dim: h } => {
                let w2 = h * p + h;
                let b2 = w2 + q * h;
                (
                    vec![self.params[..h * p].to_vec(), self.params[w2..b2].to_vec()],
                    vec![self.params[h * p..w2].to_vec(), self.params[b2..b2 + q].to_vec()],
                    Some(h),
                    Some(self.zeta()),
                )
            }
        };
        NetworkDocument {
            architecture: match self.arch {
                Architecture::SingleLayer => "single_layer".into(),
                Architecture::TwoLayerPrelu { .. } => "two_layer_prelu".into(),
            },
            head: self.head.clone(),
            p,
            q,
            hidden_dim,
            weights,
            biases,
            zeta,
            delta: self.delta,
        }
    }

    pub fn from_document(doc: &NetworkDocument) -> Result<Self> {
        let arch = match (doc.architecture.as_str(), doc.hidden_dim) {
            ("single_layer", _) => Architecture::SingleLayer,
            ("two_layer_prelu", Some(h)) => Architecture::TwoLayerPrelu { hidden_dim: h },
            ("two_layer_prelu", None) => {
                return Err(Error::invalid("two_layer_prelu requires hidden_dim"))
            }
            (other, _) => return Err(Error::invalid(format!("unknown architecture `{other}`"))),
        };
        let mut params = Vec::new();
        match arch {
            Architecture::SingleLayer => {
                if doc.weights.len() != 1 || doc.biases.len() != 1 {
                    return Err(Error::Shape("single layer expects one weight and bias block".into()));
                }
                params.extend(&doc.weights[0]);
                params.extend(&doc.biases[0]);
            }
            Architecture::TwoLayerPrelu { .. } => {
                if doc.weights.len() != 2 || doc.biases.len() != 2 {
                    return Err(Error::Shape("two layers expect two weight and bias blocks".into()));
                }
                let zeta = doc
                    .zeta
                    .ok_or_else(|| Error::invalid("two_layer_prelu requires zeta"))?;
                params.extend(&doc.weights[0]);
                params.extend(&doc.biases[0]);
                params.extend(&doc.weights[1]);
                params.extend(&doc.biases[1]);
                params.push(zeta);
            }
        }
        Self::from_params(arch, doc.head.clone(), doc.p, doc.q, doc.delta, params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("network document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }
}

/// On-disk JSON form of a [`PriorNetwork`]; weights are row-major blocks.
///
/// Floats are written in shortest round-trip form, so reading a document
/// back reproduces every parameter bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub architecture: String,
    pub head: OutputHead,
    pub p: usize,
    pub q: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hidden_dim: Option<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zeta: Option<f64>,
    pub delta: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Parametric ReLU, `x` for `x ≥ 0` and `ζx` otherwise.
pub fn prelu(x: f64, zeta: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        zeta * x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probit_head() -> OutputHead {
        OutputHead::Componentwise(vec![Activation::Exp, Activation::Softplus])
    }

    #[test]
    fn latent_samples_are_deterministic() {
        let spec = LatentSpec::new(2).unwrap();
        let a = spec.sample(3, 7);
        let b = spec.sample(3, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|r| r.len() == 2));
        assert!(LatentSpec::new(0).is_err());
    }

    #[test]
    fn latent_moments_match_standard_normal() {
        let spec = LatentSpec::new(1).unwrap();
        let n = 100_000;
        let xs: Vec<f64> = spec.sample(n, 11).into_iter().map(|r| r[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.02);
        let wide = LatentSpec::new(50).unwrap().sample(1, 3);
        assert!(wide[0].iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_softmax_net_is_uniform() {
        let net = PriorNetwork::zeros(Architecture::SingleLayer, OutputHead::Softmax, 3, 4, 1e-6).unwrap();
        let theta = net.forward(&[0.3, -2.0, 5.0]).unwrap();
        for t in &theta {
            assert!((t - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_exp_softplus_net() {
        let net = PriorNetwork::zeros(Architecture::SingleLayer, probit_head(), 5, 2, 0.0).unwrap();
        let theta = net.forward(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(theta[0], 1.0);
        assert!((theta[1] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn prelu_negative_branch() {
        assert_eq!(prelu(-2.0, 0.25), -0.5);
        assert_eq!(prelu(3.0, 0.25), 3.0);
    }

    #[test]
    fn forward_rejects_non_finite_latent() {
        let net = PriorNetwork::zeros(Architecture::SingleLayer, OutputHead::Softmax, 2, 2, 1e-6).unwrap();
        assert!(matches!(net.forward(&[f64::NAN, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(net.forward(&[0.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn exp_bias_jacobian_equals_output() {
        let net = PriorNetwork::from_params(
            Architecture::SingleLayer,
            OutputHead::Componentwise(vec![Activation::Exp]),
            2,
            1,
            0.0,
            vec![0.4, -0.7, 0.2],
        )
        .unwrap();
        let eps = [0.9, -1.3];
        let theta = net.forward(&eps).unwrap()[0];
        let jac = net.jacobian_params(&eps).unwrap();
        assert!((jac.get(0, 2) - theta).abs() < 1e-15);
        assert!((jac.get(0, 0) - theta * eps[0]).abs() < 1e-15);
    }

    #[test]
    fn softmax_bias_jacobian_at_symmetric_point() {
        let net = PriorNetwork::zeros(Architecture::SingleLayer, OutputHead::Softmax, 1, 2, 0.0).unwrap();
        let jac = net.jacobian_params(&[0.5]).unwrap();
        // layout: W (2×1), b (2)
        assert!((jac.get(0, 2) - 0.25).abs() < 1e-15);
        assert!((jac.get(0, 3) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let net = PriorNetwork::init(
            Architecture::TwoLayerPrelu { hidden_dim: 10 },
            OutputHead::Softmax,
            8,
            4,
            InitConfig { weight_std: 1.0, ..Default::default() },
            3,
        )
        .unwrap();
        for row in net.sample_prior(500, 5) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&t| t > 0.0));
        }
    }

    #[test]
    fn dirac_pushforward_is_constant() {
        let mut params = vec![0.0; 3 * 2 + 2];
        params[6] = 0.3;
        params[7] = -1.1;
        let net = PriorNetwork::from_params(Architecture::SingleLayer, probit_head(), 3, 2, 0.0, params).unwrap();
        let rows = net.sample_prior(20, 1);
        assert!(rows.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn softplus_marginal_closed_form_value() {
        let mut params = vec![0.0; 2 * 2 + 2];
        params[2] = 1.0; // ‖w₂‖ = 1
        let net = PriorNetwork::from_params(Architecture::SingleLayer, probit_head(), 2, 2, 0.0, params).unwrap();
        let d = net.analytic_marginal(1, std::f64::consts::LN_2).unwrap().unwrap();
        let expected = 2.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((d - expected).abs() < 1e-12);
        assert!(net.analytic_marginal(1, 0.0).is_err());
        // zero weight row for θ₁ → Dirac, no density
        assert_eq!(net.analytic_marginal(0, 1.0).unwrap(), None);
    }

    #[test]
    fn exp_marginal_median() {
        let params = vec![0.6, 0.8, 0.0, 0.0, 0.7, 0.0];
        let net = PriorNetwork::from_params(Architecture::SingleLayer, probit_head(), 2, 2, 0.0, params).unwrap();
        // log-normal(0.7, 1): density at the median exp(0.7) is 1/(√(2π) e^{0.7})
        let d = net.analytic_marginal(0, 0.7f64.exp()).unwrap().unwrap();
        let expected = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * 0.7f64.exp());
        assert!((d - expected).abs() < 1e-12);
    }

    #[test]
    fn two_layer_has_no_closed_form() {
        let net = PriorNetwork::zeros(
            Architecture::TwoLayerPrelu { hidden_dim: 3 },
            OutputHead::Componentwise(vec![Activation::Exp]),
            2,
            1,
            0.0,
        )
        .unwrap();
        assert_eq!(net.analytic_marginal(0, 1.0).unwrap(), None);
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let net = PriorNetwork::init(
            Architecture::TwoLayerPrelu { hidden_dim: 4 },
            OutputHead::Softmax,
            6,
            3,
            InitConfig::default(),
            99,
        )
        .unwrap();
        let back = PriorNetwork::from_json(&net.to_json()).unwrap();
        assert_eq!(net, back);
        for (a, b) in net.params().iter().zip(back.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn prelu_slope_is_projected_positive() {
        let mut net = PriorNetwork::zeros(
            Architecture::TwoLayerPrelu { hidden_dim: 2 },
            OutputHead::Softmax,
            2,
            2,
            1e-6,
        )
        .unwrap();
        let mut params = net.params().to_vec();
        *params.last_mut().unwrap() = -0.3;
        net.set_params(&params).unwrap();
        assert!(net.zeta() > 0.0);
    }
}
