//! Closed-form reference priors and posteriors.

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, InverseGamma};

use crate::error::{Error, Result};
use crate::optimizer::lagrangian::ConstraintFn;
use crate::rng::{self, tags};
use crate::stat_models::{DataSet, ModelSpec};

/// `n` draws from `Dir(γ)` by normalized Gamma draws.
pub fn sample_dirichlet(gamma: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if gamma.len() < 2 || gamma.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::invalid("Dirichlet parameters must be positive, at least two"));
    }
    let gs: Vec<Gamma<f64>> = gamma.iter().map(|&g| Gamma::new(g, 1.0).expect("positive shape")).collect();
    let mut r = rng::stream(seed, tags::REFERENCE, 1);
    Ok((0..n)
        .map(|_| {
            let mut x: Vec<f64> = gs.iter().map(|g| g.sample(&mut r)).collect();
            let s: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= s);
            x
        })
        .collect())
}

/// Jeffreys prior of the multinomial: `Dir(½, …, ½)`.
pub fn multinomial_jeffreys_prior(q: usize) -> Vec<f64> {
    vec![0.5; q]
}

/// Jeffreys posterior parameters `γ_j = ½ + Σᵢ Xᵢʲ`.
pub fn multinomial_jeffreys_posterior(data: &DataSet) -> Result<Vec<f64>> {
    match data {
        DataSet::Multinomial(rows) => {
            let q = rows.first().map_or(0, |r| r.len());
            if q == 0 {
                return Err(Error::invalid("empty multinomial dataset"));
            }
            let mut g = vec![0.5; q];
            for r in rows {
                for (gj, &x) in g.iter_mut().zip(r) {
                    *gj += x as f64;
                }
            }
            Ok(g)
        }
        _ => Err(Error::invalid("not a multinomial dataset")),
    }
}

/// `(a, b)` of the Beta marginal of coordinate `j` under `Dir(γ)`.
pub fn dirichlet_marginal(gamma: &[f64], j: usize) -> (f64, f64) {
    let s: f64 = gamma.iter().sum();
    (gamma[j], s - gamma[j])
}

/// `Γ⁻¹(shape, scale)` with density `∝ θ^{−shape−1} e^{−scale/θ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseGammaRef {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGammaRef {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
            return Err(Error::invalid("inverse-gamma parameters must be positive"));
        }
        Ok(Self { shape, scale })
    }

    fn dist(&self) -> InverseGamma {
        InverseGamma::new(self.shape, self.scale).expect("validated parameters")
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.dist().pdf(x)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.dist().cdf(x)
        }
    }

    /// Finite only for `shape > 1`.
    pub fn mean(&self) -> f64 {
        if self.shape > 1.0 {
            self.scale / (self.shape - 1.0)
        } else {
            f64::INFINITY
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let g = Gamma::new(self.shape, 1.0 / self.scale).expect("validated parameters");
        let mut r = rng::stream(seed, tags::REFERENCE, 2);
        (0..n).map(|_| 1.0 / g.sample(&mut r)).collect()
    }
}

/// Jeffreys posterior of the Gaussian variance model,
/// `Γ⁻¹(N/2, ½ Σ(Xᵢ − μ)²)`.
pub fn gaussvar_jeffreys_posterior(model: &ModelSpec, data: &DataSet) -> Result<InverseGammaRef> {
    match (model, data) {
        (ModelSpec::GaussVar { mu }, DataSet::GaussVar(x)) if !x.is_empty() => {
            let s: f64 = x.iter().map(|v| (v - mu).powi(2)).sum();
            InverseGammaRef::new(x.len() as f64 / 2.0, s / 2.0)
        }
        _ => Err(Error::invalid("need a non-empty Gaussian-variance dataset")),
    }
}

/// `2θ/(1 + θ²)²`: `J(θ) a(θ)²/K` for `J = 1/θ`, `a = 1/(θ⁻¹ + θ)`, `K = ½`.
pub fn constrained_gaussvar_prior_pdf(theta: f64) -> f64 {
    if theta <= 0.0 {
        0.0
    } else {
        2.0 * theta / (1.0 + theta * theta).powi(2)
    }
}

pub fn constrained_gaussvar_prior_cdf(theta: f64) -> f64 {
    if theta <= 0.0 {
        0.0
    } else {
        theta * theta / (1.0 + theta * theta)
    }
}

/// Posterior `∝ a(θ)^{1/α} Γ⁻¹(θ; N/2, S/2)` of a constrained reference prior
/// with log-uniform Jeffreys part. The normalizer is a Monte Carlo average
/// over inverse-gamma draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedPosterior {
    pub base: InverseGammaRef,
    pub constraint: ConstraintFn,
    pub alpha: f64,
    pub normalizer: f64,
    pub normalizer_se: f64,
}

impl ConstrainedPosterior {
    pub fn new(base: InverseGammaRef, constraint: ConstraintFn, alpha: f64, samples: usize, seed: u64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("α must be in (0, 1)"));
        }
        if samples < 2 {
            return Err(Error::invalid("need at least two samples"));
        }
        let w: Vec<f64> = base
            .sample(samples, seed)
            .into_iter()
            .map(|t| constraint.eval_scalar(t).powf(1.0 / alpha))
            .collect();
        let n = w.len() as f64;
        let m = w.iter().sum::<f64>() / n;
        let se = (w.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        Ok(Self {
            base,
            constraint,
            alpha,
            normalizer: m,
            normalizer_se: se,
        })
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        self.constraint.eval_scalar(theta).powf(1.0 / self.alpha) * self.base.pdf(theta) / self.normalizer
    }
}

/// CDF of a density on `(0, ∞)` given by its log-density in `u = log θ`,
/// tabulated by the trapezoidal rule on a uniform `u` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCdf {
    u: Vec<f64>,
    cum: Vec<f64>,
    /// Integral of the unnormalized density.
    pub mass: f64,
}

impl TabulatedCdf {
    pub fn from_log_density<F: Fn(f64) -> f64>(log_density_u: F, u_lo: f64, u_hi: f64, points: usize) -> Result<Self> {
        if !(u_hi > u_lo) || points < 3 {
            return Err(Error::invalid("need a nonempty range and at least 3 points"));
        }
        let h = (u_hi - u_lo) / (points - 1) as f64;
        let u: Vec<f64> = (0..points).map(|i| u_lo + i as f64 * h).collect();
        let logs: Vec<f64> = u.iter().map(|&x| log_density_u(x)).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::domain("density vanishes on the whole range"));
        }
        let d: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let mut cum = vec![0.0; points];
        for i in 1..points {
            cum[i] = cum[i - 1] + 0.5 * h * (d[i - 1] + d[i]);
        }
        let total = cum[points - 1];
        cum.iter_mut().for_each(|c| *c /= total);
        Ok(Self {
            u,
            cum,
            mass: total * top.exp(),
        })
    }

    /// Linear interpolation of the tabulated CDF at `θ`.
    pub fn cdf(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        let x = theta.ln();
        let n = self.u.len();
        if x <= self.u[0] {
            return 0.0;
        }
        if x >= self.u[n - 1] {
            return 1.0;
        }
        let h = self.u[1] - self.u[0];
        let k = (((x - self.u[0]) / h) as usize).min(n - 2);
        let t = (x - self.u[k]) / h;
        (1.0 - t) * self.cum[k] + t * self.cum[k + 1]
    }
}

/// Asymptotic constrained target `∝ a(θ)^{1/α}/θ` as a tabulated CDF.
pub fn log_uniform_constrained_prior(a: &ConstraintFn, alpha: f64) -> Result<TabulatedCdf> {
    TabulatedCdf::from_log_density(|u| a.eval_scalar(u.exp()).ln() / alpha, -60.0, 60.0, 200_001)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_marginal_mean() {
        let g = multinomial_jeffreys_prior(4);
        let (a, b) = dirichlet_marginal(&g, 0);
        assert_eq!((a, b), (0.5, 1.5));
        assert!((a / (a + b) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_sampler_means() {
        let g = [0.5, 1.5, 3.0];
        let xs = sample_dirichlet(&g, 40_000, 2).unwrap();
        let s: f64 = g.iter().sum();
        for j in 0..3 {
            let v: Vec<f64> = xs.iter().map(|x| x[j]).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
            assert!((m - g[j] / s).abs() < 3.0 * sd / (v.len() as f64).sqrt());
        }
        assert!(xs.iter().all(|x| (x.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn inverse_gamma_moments() {
        let ig = InverseGammaRef::new(2.0, 1.0).unwrap();
        assert_eq!(ig.mean(), 1.0);
        assert!((ig.cdf(1.0) - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn multinomial_posterior_parameters() {
        let d = DataSet::Multinomial(vec![vec![1, 2, 0], vec![3, 0, 1]]);
        assert_eq!(multinomial_jeffreys_posterior(&d).unwrap(), vec![4.5, 2.5, 1.5]);
    }

    #[test]
    fn constrained_prior_density_integrates() {
        // ∫ 2θ/(1+θ²)² dθ over a log grid
        let n = 20_000;
        let (lo, hi) = (-15.0f64, 15.0f64);
        let h = (hi - lo) / n as f64;
        let s: f64 = (0..=n)
            .map(|i| {
                let u = lo + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * constrained_gaussvar_prior_pdf(u.exp()) * u.exp()
            })
            .sum::<f64>()
            * h;
        assert!((s - 1.0).abs() < 1e-8);
        assert!((constrained_gaussvar_prior_cdf(1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tabulated_cdf_matches_closed_form() {
        let a = ConstraintFn::Rational { component: 0, beta: -1.0, tau: 1.0 };
        let t = log_uniform_constrained_prior(&a, 0.5).unwrap();
        assert!((t.mass - 0.5).abs() < 1e-8);
        for &x in &[0.01, 0.3, 1.0, 2.5, 40.0] {
            assert!((t.cdf(x) - constrained_gaussvar_prior_cdf(x)).abs() < 1e-7);
        }
    }
}
