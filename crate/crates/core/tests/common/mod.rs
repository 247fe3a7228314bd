//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss–Hermite nodes and weights for `∫ e^{-x²} f(x) dx`, by Newton
/// iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let pim4 = PI.powf(-0.25);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `E[h(ε)]` for `ε ~ N(0, 1)` with `n`-node Gauss–Hermite.
pub fn normal_expectation(n: usize, h: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_hermite(n);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| wi * h(std::f64::consts::SQRT_2 * xi))
        .sum::<f64>()
        / PI.sqrt()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// The Bernoulli toy: N observations, θ = sigmoid(wε + b), ε ~ N(0, 1).
#[derive(Clone, Copy)]
pub struct Toy {
    pub n: usize,
    pub nodes: usize,
}

pub enum Gen {
    Kl,
    Alpha(f64),
    AlphaHat(f64),
}

impl Gen {
    pub fn f(&self, x: f64) -> f64 {
        match *self {
            Gen::Kl => -x.ln(),
            Gen::Alpha(a) => (x.powf(a) - a * x - (1.0 - a)) / (a * (a - 1.0)),
            Gen::AlphaHat(a) => (x.powf(a) - 1.0) / (a * (a - 1.0)),
        }
    }
}

fn seq_lik(theta: f64, k: usize, n: usize) -> f64 {
    theta.powi(k as i32) * (1.0 - theta).powi((n - k) as i32)
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Toy {
    pub fn new() -> Self {
        Self { n: 3, nodes: 64 }
    }

    /// Marginal probability of one particular sequence with `k` successes.
    pub fn marginal(&self, w: f64, b: f64, k: usize) -> f64 {
        normal_expectation(self.nodes, |e| seq_lik(sigmoid(w * e + b), k, self.n))
    }

    /// Exact `I_Df` by enumerating X (grouped by success count) and
    /// quadrature over ε.
    pub fn mi(&self, w: f64, b: f64, g: &Gen) -> f64 {
        let p: Vec<f64> = (0..=self.n).map(|k| self.marginal(w, b, k)).collect();
        normal_expectation(self.nodes, |e| {
            let th = sigmoid(w * e + b);
            (0..=self.n)
                .map(|k| {
                    let l = seq_lik(th, k, self.n);
                    binom(self.n, k) * l * g.f(p[k] / l)
                })
                .sum()
        })
    }

    /// Exact lower bound with the closed-form MLE k/N guarded into
    /// `[δ, 1 − δ]`.
    pub fn lower_bound(&self, w: f64, b: f64, g: &Gen, delta: f64) -> f64 {
        normal_expectation(self.nodes, |e| {
            let th = sigmoid(w * e + b);
            (0..=self.n)
                .map(|k| {
                    let mle = (k as f64 / self.n as f64).clamp(delta, 1.0 - delta);
                    let l = seq_lik(th, k, self.n);
                    binom(self.n, k) * l * g.f(seq_lik(mle, k, self.n) / l)
                })
                .sum()
        })
    }

    /// Central finite-difference gradient of `obj` in (w, b).
    pub fn fd_grad(&self, w: f64, b: f64, h: f64, obj: impl Fn(f64, f64) -> f64) -> [f64; 2] {
        [
            (obj(w + h, b) - obj(w - h, b)) / (2.0 * h),
            (obj(w, b + h) - obj(w, b - h)) / (2.0 * h),
        ]
    }
}

/// Mean and standard error of the mean, per coordinate.
pub fn mean_se(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let se = (0..d)
        .map(|j| {
            let v = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0);
            (v / n).sqrt()
        })
        .collect();
    (mean, se)
}

/// Kolmogorov–Smirnov distance between a sample and a CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}
