//! Empirical distribution functions, seed envelopes and simple distances.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// Right-continuous ECDF of a one-dimensional sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfCurve {
    /// Sorted sample values.
    pub support: Vec<f64>,
    /// `heights[i] = (i + 1)/n`.
    pub heights: Vec<f64>,
}

impl EcdfCurve {
    /// Fraction of the sample `≤ x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.support.partition_point(|&v| v <= x) as f64 / self.support.len() as f64
    }

    /// CSV with columns `value, cdf`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["value", "cdf"])?;
        for (v, h) in self.support.iter().zip(&self.heights) {
            w.write_record([v.to_string(), h.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn ecdf(samples: &[f64]) -> Result<EcdfCurve> {
    if samples.is_empty() {
        return Err(Error::invalid("ECDF of an empty sample"));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("ECDF sample contains NaN"));
    }
    let mut support = samples.to_vec();
    support.sort_by(f64::total_cmp);
    let n = support.len() as f64;
    let heights = (1..=support.len()).map(|i| i as f64 / n).collect();
    Ok(EcdfCurve { support, heights })
}

/// Pointwise band of several ECDFs on a common grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Envelope {
    /// CSV with columns `value, lower, upper`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["value", "lower", "upper"])?;
        for i in 0..self.grid.len() {
            w.write_record([self.grid[i].to_string(), self.lower[i].to_string(), self.upper[i].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn width_at(&self, x: f64) -> f64 {
        let i = self.grid.partition_point(|&g| g < x).min(self.grid.len() - 1);
        self.upper[i] - self.lower[i]
    }
}

pub fn ecdf_envelope(curves: &[EcdfCurve], grid: &[f64]) -> Result<Envelope> {
    if curves.is_empty() || grid.is_empty() {
        return Err(Error::invalid("envelope needs at least one curve and one grid point"));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut lower = vec![f64::INFINITY; grid.len()];
    let mut upper = vec![f64::NEG_INFINITY; grid.len()];
    for c in curves {
        for (i, &x) in grid.iter().enumerate() {
            let v = c.eval(x);
            lower[i] = lower[i].min(v);
            upper[i] = upper[i].max(v);
        }
    }
    Ok(Envelope { grid, lower, upper })
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    let c = ecdf(samples)?;
    let n = c.support.len() as f64;
    Ok(c.support.iter().enumerate().fold(0.0, |m, (i, &x)| {
        let f = cdf(x);
        m.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    }))
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let ca = ecdf(a)?;
    let cb = ecdf(b)?;
    Ok(ca
        .support
        .iter()
        .chain(&cb.support)
        .fold(0.0, |m, &x| m.max((ca.eval(x) - cb.eval(x)).abs())))
}

/// Monte Carlo average of `‖θ − θ_true‖`.
pub fn mean_norm_error(samples: &[Vec<f64>], theta_true: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let mut s = 0.0;
    for t in samples {
        if t.len() != theta_true.len() {
            return Err(Error::Shape(format!(
                "sample has dimension {}, θ_true has {}",
                t.len(),
                theta_true.len()
            )));
        }
        s += t.iter().zip(theta_true).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    }
    Ok(s / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecdf_values() {
        let c = ecdf(&[3.0, 1.0, 2.0]).unwrap();
        assert!((c.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.eval(0.5), 0.0);
        assert_eq!(c.eval(3.0), 1.0);
        assert!(ecdf(&[]).is_err());
    }

    #[test]
    fn envelope_of_identical_curves() {
        let c = ecdf(&[0.1, 0.5, 0.7]).unwrap();
        let grid = [0.0, 0.3, 0.6, 1.0];
        let e = ecdf_envelope(&[c.clone(), c.clone()], &grid).unwrap();
        assert_eq!(e.lower, e.upper);
        assert_eq!(e.lower, grid.iter().map(|&x| c.eval(x)).collect::<Vec<_>>());
    }

    #[test]
    fn mean_norm_error_cases() {
        let t = vec![1.0, 2.0];
        assert_eq!(mean_norm_error(&[t.clone(), t.clone()], &t).unwrap(), 0.0);
        let s = vec![vec![2.0, 2.0], vec![0.0, 2.0]];
        assert_eq!(mean_norm_error(&s, &t).unwrap(), 1.0);
        assert!(mean_norm_error(&[vec![1.0]], &t).is_err());
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }
}
