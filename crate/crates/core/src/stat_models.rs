//! Benchmark likelihoods: multinomial, probit, Gaussian variance, and a
//! small Bernoulli model used as an exactly enumerable test bed.
//!
//! Log-likelihoods are returned up to additive constants that do not
//! depend on θ, so that likelihood ratios between two θ values are exact.
//!
//! The estimators only ever need a likelihood through its sufficient
//! statistics, so simulation can produce a [`SuffStats`] directly. For the
//! multinomial this is the vector of total counts, for the variance model
//! the sum of squared deviations, for the Bernoulli model the number of
//! successes. The probit model has no reduction and keeps every pair.

use std::path::Path;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::special::{log_ndtr, log_norm_pdf, ndtr};

/// Interior guard applied to MLEs that fall on the boundary of Θ.
pub const MLE_GUARD: f64 = 1e-6;

/// Tolerance on `Σθ = 1` for multinomial parameters.
const SIMPLEX_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelSpec {
    /// `n` trials over `q` categories per observation.
    Multinomial { n: u32, q: usize },
    /// Binary response `Z ~ Bernoulli(Φ((log a − log θ₁)/θ₂))` with
    /// intensity `a ~ Log-N(mu_a, sigma2_a)`.
    Probit { mu_a: f64, sigma2_a: f64 },
    /// `X ~ N(mu, θ)` with unknown variance θ.
    GaussVar { mu: f64 },
    /// `X ~ Bernoulli(θ)`.
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbitObs {
    pub z: bool,
    pub a: f64,
}

/// Observed samples `X = (X₁, …, X_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "rows")]
pub enum DataSet {
    Multinomial(Vec<Vec<u32>>),
    Probit(Vec<ProbitObs>),
    GaussVar(Vec<f64>),
    Bernoulli(Vec<bool>),
}

/// Sufficient statistics of a dataset under its model.
#[derive(Debug, Clone, PartialEq)]
pub enum SuffStats {
    Multinomial { counts: Vec<f64>, n_obs: usize },
    /// Responses with log-intensities precomputed.
    Probit { z: Vec<bool>, ln_a: Vec<f64> },
    /// `ss = Σ (Xᵢ − μ)²`.
    GaussVar { n_obs: usize, ss: f64 },
    Bernoulli { n_obs: usize, successes: f64 },
}

impl SuffStats {
    pub fn n_obs(&self) -> usize {
        match self {
            SuffStats::Multinomial { n_obs, .. }
            | SuffStats::GaussVar { n_obs, .. }
            | SuffStats::Bernoulli { n_obs, .. } => *n_obs,
            SuffStats::Probit { z, .. } => z.len(),
        }
    }
}

impl DataSet {
    pub fn len(&self) -> usize {
        match self {
            DataSet::Multinomial(r) => r.len(),
            DataSet::Probit(r) => r.len(),
            DataSet::GaussVar(r) => r.len(),
            DataSet::Bernoulli(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Empty dataset of the kind matching `spec`.
    pub fn empty(spec: &ModelSpec) -> Self {
        match spec {
            ModelSpec::Multinomial { .. } => DataSet::Multinomial(Vec::new()),
            ModelSpec::Probit { .. } => DataSet::Probit(Vec::new()),
            ModelSpec::GaussVar { .. } => DataSet::GaussVar(Vec::new()),
            ModelSpec::Bernoulli => DataSet::Bernoulli(Vec::new()),
        }
    }

    /// Reduce to sufficient statistics, checking the data against `spec`.
    pub fn stats(&self, spec: &ModelSpec) -> Result<SuffStats> {
        match (spec, self) {
            (ModelSpec::Multinomial { n, q }, DataSet::Multinomial(rows)) => {
                let mut counts = vec![0.0; *q];
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != *q {
                        return Err(Error::Shape(format!("row {i} has {} columns, expected {q}", row.len())));
                    }
                    if row.iter().sum::<u32>() != *n {
                        return Err(Error::domain(format!("row {i} does not sum to n = {n}")));
                    }
                    for (c, &x) in counts.iter_mut().zip(row) {
                        *c += x as f64;
                    }
                }
                Ok(SuffStats::Multinomial {
                    counts,
                    n_obs: rows.len(),
                })
            }
            (ModelSpec::Probit { .. }, DataSet::Probit(obs)) => {
                if let Some(o) = obs.iter().find(|o| !(o.a > 0.0) || !o.a.is_finite()) {
                    return Err(Error::domain(format!("probit intensity must be positive, got {}", o.a)));
                }
                Ok(SuffStats::Probit {
                    z: obs.iter().map(|o| o.z).collect(),
                    ln_a: obs.iter().map(|o| o.a.ln()).collect(),
                })
            }
            (ModelSpec::GaussVar { mu }, DataSet::GaussVar(xs)) => {
                if xs.iter().any(|x| !x.is_finite()) {
                    return Err(Error::domain("non-finite observation"));
                }
                Ok(SuffStats::GaussVar {
                    n_obs: xs.len(),
                    ss: xs.iter().map(|x| (x - mu) * (x - mu)).sum(),
                })
            }
            (ModelSpec::Bernoulli, DataSet::Bernoulli(xs)) => Ok(SuffStats::Bernoulli {
                n_obs: xs.len(),
                successes: xs.iter().filter(|&&x| x).count() as f64,
            }),
            _ => Err(Error::Shape("dataset kind does not match the model".into())),
        }
    }

    /// Write as CSV with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        match self {
            DataSet::Multinomial(rows) => {
                let q = rows.first().map_or(0, |r| r.len());
                w.write_record((1..=q).map(|j| format!("x{j}")))?;
                for row in rows {
                    w.write_record(row.iter().map(|v| v.to_string()))?;
                }
            }
            DataSet::Probit(obs) => {
                w.write_record(["z", "a"])?;
                for o in obs {
                    w.write_record([(o.z as u8).to_string(), o.a.to_string()])?;
                }
            }
            DataSet::GaussVar(xs) => {
                w.write_record(["x"])?;
                for x in xs {
                    w.write_record([x.to_string()])?;
                }
            }
            DataSet::Bernoulli(xs) => {
                w.write_record(["x"])?;
                for &x in xs {
                    w.write_record([(x as u8).to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Read a CSV written by [`DataSet::write_csv`] for the given model.
    pub fn read_csv(path: &Path, spec: &ModelSpec) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let bad = |msg: String| Error::config(path.display().to_string(), msg);
        let data = match spec {
            ModelSpec::Multinomial { q, .. } => {
                let mut rows = Vec::new();
                for rec in r.records() {
                    let rec = rec?;
                    if rec.len() != *q {
                        return Err(bad(format!("expected {q} columns, got {}", rec.len())));
                    }
                    let row = rec
                        .iter()
                        .map(|s| s.trim().parse::<u32>().map_err(|e| bad(e.to_string())))
                        .collect::<Result<Vec<_>>>()?;
                    rows.push(row);
                }
                DataSet::Multinomial(rows)
            }
            ModelSpec::Probit { .. } => {
                let mut obs = Vec::new();
                for rec in r.records() {
                    let rec = rec?;
                    if rec.len() != 2 {
                        return Err(bad("probit rows need columns z,a".into()));
                    }
                    let z = match rec[0].trim() {
                        "0" => false,
                        "1" => true,
                        other => return Err(bad(format!("z must be 0 or 1, got `{other}`"))),
                    };
                    let a = rec[1].trim().parse::<f64>().map_err(|e| bad(e.to_string()))?;
                    obs.push(ProbitObs { z, a });
                }
                DataSet::Probit(obs)
            }
            ModelSpec::GaussVar { .. } => {
                let mut xs = Vec::new();
                for rec in r.records() {
                    let rec = rec?;
                    xs.push(rec[0].trim().parse::<f64>().map_err(|e| bad(e.to_string()))?);
                }
                DataSet::GaussVar(xs)
            }
            ModelSpec::Bernoulli => {
                let mut xs = Vec::new();
                for rec in r.records() {
                    let rec = rec?;
                    xs.push(match rec[0].trim() {
                        "0" => false,
                        "1" => true,
                        other => return Err(bad(format!("x must be 0 or 1, got `{other}`"))),
                    });
                }
                DataSet::Bernoulli(xs)
            }
        };
        data.stats(spec)?;
        Ok(data)
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Multinomial { n, q } => {
                if *n < 1 {
                    return Err(Error::invalid("multinomial needs n >= 1"));
                }
                if *q < 2 {
                    return Err(Error::invalid("multinomial needs q >= 2"));
                }
            }
            ModelSpec::Probit { mu_a, sigma2_a } => {
                if !mu_a.is_finite() || !(*sigma2_a > 0.0) || !sigma2_a.is_finite() {
                    return Err(Error::invalid("probit needs finite mu_a and sigma2_a > 0"));
                }
            }
            ModelSpec::GaussVar { mu } => {
                if !mu.is_finite() {
                    return Err(Error::invalid("gaussvar needs a finite mean"));
                }
            }
            ModelSpec::Bernoulli => {}
        }
        Ok(())
    }

    /// Dimension of θ.
    pub fn param_dim(&self) -> usize {
        match self {
            ModelSpec::Multinomial { q, .. } => *q,
            ModelSpec::Probit { .. } => 2,
            ModelSpec::GaussVar { .. } | ModelSpec::Bernoulli => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Multinomial { .. } => "multinomial",
            ModelSpec::Probit { .. } => "probit",
            ModelSpec::GaussVar { .. } => "gaussvar",
            ModelSpec::Bernoulli => "bernoulli",
        }
    }

    /// Check that θ lies in the interior of Θ.
    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_dim() {
            return Err(Error::Shape(format!(
                "θ has length {}, model expects {}",
                theta.len(),
                self.param_dim()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("non-finite θ"));
        }
        let ok = match self {
            ModelSpec::Multinomial { .. } => {
                theta.iter().all(|&t| t > 0.0) && (theta.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
            }
            ModelSpec::Probit { .. } | ModelSpec::GaussVar { .. } => theta.iter().all(|&t| t > 0.0),
            ModelSpec::Bernoulli => theta[0] > 0.0 && theta[0] < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("θ = {theta:?} outside the {} parameter space", self.name())))
        }
    }

    /// Simulate `n_obs` i.i.d. observations from `L(·|θ)`.
    pub fn sample_data(&self, theta: &[f64], n_obs: usize, seed: u64) -> Result<DataSet> {
        self.validate()?;
        self.check_theta(theta)?;
        let mut rng = rng::stream(seed, rng::tags::DATA, 0);
        Ok(match self {
            ModelSpec::Multinomial { n, .. } => DataSet::Multinomial(
                (0..n_obs).map(|_| multinomial_draw(*n as u64, theta, &mut rng)).collect(),
            ),
            ModelSpec::Probit { mu_a, sigma2_a } => {
                let sd = sigma2_a.sqrt();
                DataSet::Probit(
                    (0..n_obs)
                        .map(|_| {
                            let g: f64 = StandardNormal.sample(&mut rng);
                            let a = (mu_a + sd * g).exp();
                            let p = ndtr(probit_gamma(a, theta));
                            let z = rng.random::<f64>() < p;
                            ProbitObs { z, a }
                        })
                        .collect(),
                )
            }
            ModelSpec::GaussVar { mu } => {
                let sd = theta[0].sqrt();
                DataSet::GaussVar(
                    (0..n_obs)
                        .map(|_| {
                            let g: f64 = StandardNormal.sample(&mut rng);
                            mu + sd * g
                        })
                        .collect(),
                )
            }
            ModelSpec::Bernoulli => {
                DataSet::Bernoulli((0..n_obs).map(|_| rng.random::<f64>() < theta[0]).collect())
            }
        })
    }

    /// Simulate the sufficient statistics of `n_obs` observations directly.
    ///
    /// `theta` must be valid; this is the hot path of the estimators.
    pub fn sample_stats<R: Rng + ?Sized>(&self, theta: &[f64], n_obs: usize, rng: &mut R) -> SuffStats {
        match self {
            ModelSpec::Multinomial { n, .. } => {
                let draws = multinomial_draw(*n as u64 * n_obs as u64, theta, rng);
                SuffStats::Multinomial {
                    counts: draws.into_iter().map(|c| c as f64).collect(),
                    n_obs,
                }
            }
            ModelSpec::Probit { mu_a, sigma2_a } => {
                let sd = sigma2_a.sqrt();
                let lt1 = theta[0].ln();
                let mut z = Vec::with_capacity(n_obs);
                let mut ln_a = Vec::with_capacity(n_obs);
                for _ in 0..n_obs {
                    let g: f64 = StandardNormal.sample(rng);
                    let la = mu_a + sd * g;
                    let p = ndtr((la - lt1) / theta[1]);
                    z.push(rng.random::<f64>() < p);
                    ln_a.push(la);
                }
                SuffStats::Probit { z, ln_a }
            }
            ModelSpec::GaussVar { .. } => {
                let ss = if n_obs == 0 {
                    0.0
                } else {
                    // Σ(Xᵢ−μ)² = θ·χ²_N
                    let chi2 = Gamma::new(n_obs as f64 / 2.0, 2.0).expect("valid gamma");
                    theta[0] * chi2.sample(rng)
                };
                SuffStats::GaussVar { n_obs, ss }
            }
            ModelSpec::Bernoulli => {
                let k = Binomial::new(n_obs as u64, theta[0].clamp(0.0, 1.0))
                    .expect("valid binomial")
                    .sample(rng);
                SuffStats::Bernoulli {
                    n_obs,
                    successes: k as f64,
                }
            }
        }
    }

    /// `log L_N(X|θ)` up to a θ-independent constant.
    pub fn log_likelihood(&self, data: &DataSet, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        let stats = data.stats(self)?;
        Ok(self.log_lik_stats(&stats, theta))
    }

    /// Score `∂ log L_N / ∂θ`.
    pub fn grad_log_likelihood(&self, data: &DataSet, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let stats = data.stats(self)?;
        let mut out = vec![0.0; theta.len()];
        self.score_stats(&stats, theta, &mut out);
        Ok(out)
    }

    /// Log-likelihood from sufficient statistics. θ is assumed valid.
    pub fn log_lik_stats(&self, stats: &SuffStats, theta: &[f64]) -> f64 {
        self.log_lik_prepared(stats, &PreparedTheta::new(theta))
    }

    /// Log-likelihood with the logarithms of θ computed once.
    pub fn log_lik_prepared(&self, stats: &SuffStats, prep: &PreparedTheta) -> f64 {
        let logs = &prep.logs;
        match stats {
            SuffStats::Multinomial { counts, .. } => counts
                .iter()
                .zip(logs)
                .map(|(&c, &lt)| if c == 0.0 { 0.0 } else { c * lt })
                .sum(),
            SuffStats::Probit { z, ln_a } => {
                let (lt1, t2) = (logs[0], prep.theta[1]);
                z.iter()
                    .zip(ln_a)
                    .map(|(&z, &la)| {
                        let g = (la - lt1) / t2;
                        if z {
                            log_ndtr(g)
                        } else {
                            log_ndtr(-g)
                        }
                    })
                    .sum()
            }
            SuffStats::GaussVar { n_obs, ss } => -0.5 * *n_obs as f64 * logs[0] - ss / (2.0 * prep.theta[0]),
            SuffStats::Bernoulli { n_obs, successes } => {
                let k = *successes;
                let m = *n_obs as f64 - k;
                let mut v = 0.0;
                if k > 0.0 {
                    v += k * logs[0];
                }
                if m > 0.0 {
                    v += m * prep.log1m;
                }
                v
            }
        }
    }

    /// Score from sufficient statistics, written into `out`. θ is assumed valid.
    pub fn score_stats(&self, stats: &SuffStats, theta: &[f64], out: &mut [f64]) {
        match stats {
            SuffStats::Multinomial { counts, .. } => {
                for ((o, &c), &t) in out.iter_mut().zip(counts).zip(theta) {
                    *o = c / t;
                }
            }
            SuffStats::Probit { z, ln_a } => {
                let (t1, t2) = (theta[0], theta[1]);
                let lt1 = t1.ln();
                let (mut s1, mut s2) = (0.0, 0.0);
                for (&z, &la) in z.iter().zip(ln_a) {
                    let g = (la - lt1) / t2;
                    // d log L / dγ
                    let d = if z {
                        (log_norm_pdf(g) - log_ndtr(g)).exp()
                    } else {
                        -(log_norm_pdf(g) - log_ndtr(-g)).exp()
                    };
                    s1 -= d / (t1 * t2);
                    s2 -= d * g / t2;
                }
                out[0] = s1;
                out[1] = s2;
            }
            SuffStats::GaussVar { n_obs, ss } => {
                let t = theta[0];
                out[0] = -0.5 * *n_obs as f64 / t + ss / (2.0 * t * t);
            }
            SuffStats::Bernoulli { n_obs, successes } => {
                let t = theta[0];
                out[0] = successes / t - (*n_obs as f64 - successes) / (1.0 - t);
            }
        }
    }

    /// Closed-form maximum-likelihood estimate, when the model has one.
    ///
    /// Estimates on the boundary of Θ are pulled inside by [`MLE_GUARD`].
    pub fn exact_mle(&self, data: &DataSet) -> Result<Option<Vec<f64>>> {
        if data.is_empty() {
            return Err(Error::invalid("MLE of an empty dataset"));
        }
        let stats = data.stats(self)?;
        Ok(self.mle_stats(&stats))
    }

    pub fn mle_stats(&self, stats: &SuffStats) -> Option<Vec<f64>> {
        match stats {
            SuffStats::Multinomial { counts, .. } => {
                let total: f64 = counts.iter().sum();
                if total == 0.0 {
                    return None;
                }
                let q = counts.len() as f64;
                let scale = 1.0 - q * MLE_GUARD;
                Some(counts.iter().map(|c| scale * c / total + MLE_GUARD).collect())
            }
            SuffStats::Probit { .. } => None,
            SuffStats::GaussVar { n_obs, ss } => {
                if *n_obs == 0 {
                    None
                } else {
                    Some(vec![(ss / *n_obs as f64).max(MLE_GUARD)])
                }
            }
            SuffStats::Bernoulli { n_obs, successes } => {
                if *n_obs == 0 {
                    None
                } else {
                    Some(vec![(successes / *n_obs as f64).clamp(MLE_GUARD, 1.0 - MLE_GUARD)])
                }
            }
        }
    }

    /// Unguarded MLE, as printed by the closed-form count average.
    pub fn raw_mle(&self, data: &DataSet) -> Result<Option<Vec<f64>>> {
        if data.is_empty() {
            return Err(Error::invalid("MLE of an empty dataset"));
        }
        Ok(match data.stats(self)? {
            SuffStats::Multinomial { counts, .. } => {
                let total: f64 = counts.iter().sum();
                Some(counts.iter().map(|c| c / total).collect())
            }
            SuffStats::Probit { .. } => None,
            SuffStats::GaussVar { n_obs, ss } => Some(vec![ss / n_obs as f64]),
            SuffStats::Bernoulli { n_obs, successes } => Some(vec![successes / n_obs as f64]),
        })
    }
}

/// θ together with `log θ` (componentwise) and `log(1 − θ₁)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTheta {
    pub theta: Vec<f64>,
    pub logs: Vec<f64>,
    pub log1m: f64,
}

impl PreparedTheta {
    pub fn new(theta: &[f64]) -> Self {
        Self {
            theta: theta.to_vec(),
            logs: theta.iter().map(|t| t.ln()).collect(),
            log1m: (-theta[0]).ln_1p(),
        }
    }
}

/// Standardised intensity `γ = (log a − log θ₁)/θ₂`.
pub fn probit_gamma(a: f64, theta: &[f64]) -> f64 {
    (a.ln() - theta[0].ln()) / theta[1]
}

/// True when the Z = 0 and Z = 1 points are separated by a threshold on
/// `a`, in which case the likelihood is flat in a region reaching θ₂ → 0.
pub fn probit_is_degenerate(obs: &[ProbitObs]) -> bool {
    let max0 = obs.iter().filter(|o| !o.z).map(|o| o.a).fold(f64::NEG_INFINITY, f64::max);
    let min1 = obs.iter().filter(|o| o.z).map(|o| o.a).fold(f64::INFINITY, f64::min);
    max0 < min1
}

/// One multinomial vector by sequential conditional binomials.
fn multinomial_draw<R: Rng + ?Sized>(trials: u64, probs: &[f64], rng: &mut R) -> Vec<u32> {
    let mut out = vec![0u32; probs.len()];
    let mut left = trials;
    let mut mass = 1.0;
    for (j, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if j + 1 == probs.len() {
            out[j] = left as u32;
            break;
        }
        let prob = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, prob).expect("valid binomial").sample(rng);
        out[j] = k as u32;
        left -= k;
        mass -= p;
        if mass <= 0.0 {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn multinomial() -> ModelSpec {
        ModelSpec::Multinomial { n: 10, q: 4 }
    }

    fn probit() -> ModelSpec {
        ModelSpec::Probit {
            mu_a: 0.0,
            sigma2_a: 1.0,
        }
    }

    #[test]
    fn multinomial_loglik_single_row() {
        let data = DataSet::Multinomial(vec![vec![10, 0, 0, 0]]);
        let theta = [0.4, 0.2, 0.2, 0.2];
        let ll = multinomial().log_likelihood(&data, &theta).unwrap();
        assert!((ll - 10.0 * 0.4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn multinomial_score_is_count_over_theta() {
        let data = DataSet::Multinomial(vec![vec![3, 7, 0, 0]]);
        let s = multinomial().grad_log_likelihood(&data, &[0.25; 4]).unwrap();
        assert_eq!(s, vec![12.0, 28.0, 0.0, 0.0]);
    }

    #[test]
    fn multinomial_mle_count_average() {
        let data = DataSet::Multinomial(vec![vec![10, 0, 0, 0]]);
        assert_eq!(multinomial().raw_mle(&data).unwrap().unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        let guarded = multinomial().exact_mle(&data).unwrap().unwrap();
        assert!(guarded.iter().all(|&t| t > 0.0));
        assert!((guarded.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn near_degenerate_multinomial_puts_all_trials_first() {
        let d = 1e-9;
        let theta = [1.0 - 3.0 * d, d, d, d];
        let data = multinomial().sample_data(&theta, 100, 1).unwrap();
        if let DataSet::Multinomial(rows) = data {
            assert!(rows.iter().all(|r| r == &vec![10, 0, 0, 0]));
        } else {
            unreachable!()
        }
    }

    #[test]
    fn multinomial_rows_sum_to_n() {
        let data = multinomial().sample_data(&[0.1, 0.2, 0.3, 0.4], 500, 3).unwrap();
        if let DataSet::Multinomial(rows) = data {
            assert!(rows.iter().all(|r| r.iter().sum::<u32>() == 10));
        }
    }

    #[test]
    fn gaussvar_loglik_score_mle() {
        let m = ModelSpec::GaussVar { mu: 0.0 };
        let data = DataSet::GaussVar(vec![2.0]);
        assert!((m.log_likelihood(&data, &[1.0]).unwrap() + 2.0).abs() < 1e-15);
        assert!((m.grad_log_likelihood(&data, &[1.0]).unwrap()[0] - 1.5).abs() < 1e-15);
        let data = DataSet::GaussVar(vec![1.0, -1.0, 2.0]);
        assert_eq!(m.exact_mle(&data).unwrap().unwrap(), vec![2.0]);
        assert!(m.log_likelihood(&data, &[0.0]).is_err());
    }

    #[test]
    fn gaussvar_sample_variance() {
        let m = ModelSpec::GaussVar { mu: 0.0 };
        let n = 100_000;
        if let DataSet::GaussVar(xs) = m.sample_data(&[1.0], n, 5).unwrap() {
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
        }
    }

    #[test]
    fn probit_at_threshold() {
        let data = DataSet::Probit(vec![ProbitObs { z: true, a: 1.0 }]);
        let ll = probit().log_likelihood(&data, &[1.0, 1.0]).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);
        let s = probit().grad_log_likelihood(&data, &[1.0, 1.0]).unwrap();
        assert!((s[0] + 0.797_884_560_802_865_4).abs() < 1e-12);
        assert!(s[1].abs() < 1e-15);
    }

    #[test]
    fn probit_small_slope_gives_ones() {
        let theta = [0.5, 1e-8];
        let stats = probit().sample_stats(&theta, 2000, &mut rng::rng_from_seed(2));
        if let SuffStats::Probit { z, ln_a } = stats {
            for (z, la) in z.iter().zip(ln_a) {
                assert_eq!(*z, la > 0.5f64.ln());
            }
        }
    }

    #[test]
    fn probit_likelihood_flattens_for_large_slope() {
        // Deviation from 2^-N is about 2φ(0)·Σ±log(aᵢ/θ₁)/θ₂ to first order.
        let data = DataSet::Probit(vec![
            ProbitObs { z: true, a: 0.5f64.exp() },
            ProbitObs { z: false, a: 0.3f64.exp() },
        ]);
        let ll = probit().log_likelihood(&data, &[1.0, 1e6]).unwrap();
        assert!(((ll + 2.0 * std::f64::consts::LN_2).exp() - 1.0).abs() <= 1e-6);

        let data = probit().sample_data(&[1.0, 0.5], 20, 9).unwrap();
        let ll = probit().log_likelihood(&data, &[1.0, 1e9]).unwrap();
        assert!(((ll + 20.0 * std::f64::consts::LN_2).exp() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn degenerate_detector() {
        let sep = vec![
            ProbitObs { z: false, a: 0.5 },
            ProbitObs { z: true, a: 2.0 },
            ProbitObs { z: true, a: 1.0 },
        ];
        assert!(probit_is_degenerate(&sep));
        let mixed = vec![
            ProbitObs { z: true, a: 0.5 },
            ProbitObs { z: false, a: 2.0 },
        ];
        assert!(!probit_is_degenerate(&mixed));
    }

    #[test]
    fn probit_has_no_closed_form_mle() {
        let data = probit().sample_data(&[1.0, 0.5], 10, 1).unwrap();
        assert_eq!(probit().exact_mle(&data).unwrap(), None);
    }

    #[test]
    fn empty_dataset_mle_errors() {
        let m = ModelSpec::GaussVar { mu: 0.0 };
        assert!(m.exact_mle(&DataSet::GaussVar(vec![])).is_err());
    }

    #[test]
    fn theta_outside_space_is_rejected() {
        assert!(multinomial().sample_data(&[0.5, 0.5, 0.0, 0.0], 1, 0).is_err());
        assert!(probit().sample_data(&[1.0, 0.0], 1, 0).is_err());
        assert!(ModelSpec::GaussVar { mu: 0.0 }.sample_data(&[-1.0], 1, 0).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        for (spec, theta) in [
            (multinomial(), vec![0.1, 0.2, 0.3, 0.4]),
            (probit(), vec![3.37, 0.43]),
            (ModelSpec::GaussVar { mu: 0.0 }, vec![2.0]),
            (ModelSpec::Bernoulli, vec![0.3]),
        ] {
            let data = spec.sample_data(&theta, 7, 4).unwrap();
            let path = dir.path().join(format!("{}.csv", spec.name()));
            data.write_csv(&path).unwrap();
            assert_eq!(DataSet::read_csv(&path, &spec).unwrap(), data);
        }
    }
}
