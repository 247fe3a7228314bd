//! f-divergence generators used by the mutual-information objectives.
//!
//! Each kind provides `f`, `f′` and `F(x) = f(x) − x f′(x)`:
//!
//! * KL: `f = −log`
//! * α: `f_α(x) = (x^α − αx − (1 − α)) / (α(α − 1))`
//! * stabilized α: `f̂_α(x) = (x^α − 1) / (α(α − 1))`, which differs from
//!   `f_α` by the linear term `(x − 1)/(α − 1)` and is decreasing, so it can
//!   be used in the lower-bound objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest α accepted unless explicitly overridden. Closer to 1 the
/// gradient estimators become unstable.
pub const ALPHA_GUARD: f64 = 0.95;

/// Log-ratios are clamped to this range before exponentiation.
pub const LOG_RATIO_CLAMP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DivergenceSpec {
    Kl,
    Alpha {
        alpha: f64,
        #[serde(default = "stabilized_default")]
        stabilized: bool,
    },
}

fn stabilized_default() -> bool {
    true
}

impl DivergenceSpec {
    pub fn kl() -> Self {
        DivergenceSpec::Kl
    }

    /// α-divergence with `α ∈ (0, ALPHA_GUARD]`.
    pub fn alpha(alpha: f64, stabilized: bool) -> Result<Self> {
        Self::alpha_unchecked_guard(alpha, stabilized, false)
    }

    /// α-divergence; `allow_near_one` lifts the `α ≤ 0.95` guard.
    pub fn alpha_unchecked_guard(alpha: f64, stabilized: bool, allow_near_one: bool) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("α must lie in (0, 1), got {alpha}")));
        }
        if alpha > ALPHA_GUARD && !allow_near_one {
            return Err(Error::invalid(format!(
                "α = {alpha} exceeds {ALPHA_GUARD}; estimators are unstable near 1 (set allow_alpha_near_one to override)"
            )));
        }
        Ok(DivergenceSpec::Alpha { alpha, stabilized })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DivergenceSpec::Kl => Ok(()),
            DivergenceSpec::Alpha { alpha, .. } if alpha > 0.0 && alpha < 1.0 => Ok(()),
            DivergenceSpec::Alpha { alpha, .. } => {
                Err(Error::invalid(format!("α must lie in (0, 1), got {alpha}")))
            }
        }
    }

    pub fn is_kl(&self) -> bool {
        matches!(self, DivergenceSpec::Kl)
    }

    /// Same α with the stabilized generator.
    pub fn stabilized(self) -> Self {
        match self {
            DivergenceSpec::Kl => DivergenceSpec::Kl,
            DivergenceSpec::Alpha { alpha, .. } => DivergenceSpec::Alpha {
                alpha,
                stabilized: true,
            },
        }
    }

    /// `f` is non-increasing on (0, ∞).
    pub fn is_decreasing(&self) -> bool {
        matches!(
            self,
            DivergenceSpec::Kl | DivergenceSpec::Alpha { stabilized: true, .. }
        )
    }

    fn check(&self, x: f64) -> Result<()> {
        if x.is_nan() || x < 0.0 {
            return Err(Error::domain(format!("divergence argument must be >= 0, got {x}")));
        }
        if x == 0.0 && !matches!(self, DivergenceSpec::Alpha { stabilized: true, .. }) {
            return Err(Error::domain("divergence argument 0 is only allowed for the stabilized α generator"));
        }
        Ok(())
    }

    pub fn f_value(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.f(x))
    }

    pub fn f_prime(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain(format!("f′ needs x > 0, got {x}")));
        }
        Ok(self.df(x))
    }

    /// `F(x) = f(x) − x f′(x)`.
    pub fn f_term(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.big_f(x))
    }

    /// `f(x)` without argument checks.
    pub fn f(&self, x: f64) -> f64 {
        match *self {
            DivergenceSpec::Kl => -x.ln(),
            DivergenceSpec::Alpha { alpha: a, stabilized: false } => {
                (x.powf(a) - a * x - (1.0 - a)) / (a * (a - 1.0))
            }
            DivergenceSpec::Alpha { alpha: a, stabilized: true } => (x.powf(a) - 1.0) / (a * (a - 1.0)),
        }
    }

    /// `f′(x)` without argument checks.
    pub fn df(&self, x: f64) -> f64 {
        match *self {
            DivergenceSpec::Kl => -1.0 / x,
            DivergenceSpec::Alpha { alpha: a, stabilized: false } => (x.powf(a - 1.0) - 1.0) / (a - 1.0),
            DivergenceSpec::Alpha { alpha: a, stabilized: true } => x.powf(a - 1.0) / (a - 1.0),
        }
    }

    /// `x f′(x)`, finite at `x = 0` where the product has a limit.
    pub fn x_df(&self, x: f64) -> f64 {
        match *self {
            DivergenceSpec::Kl => -1.0,
            DivergenceSpec::Alpha { alpha: a, stabilized: false } => (x.powf(a) - x) / (a - 1.0),
            DivergenceSpec::Alpha { alpha: a, stabilized: true } => x.powf(a) / (a - 1.0),
        }
    }

    /// `F(x)` without argument checks.
    pub fn big_f(&self, x: f64) -> f64 {
        match *self {
            DivergenceSpec::Kl => 1.0 - x.ln(),
            DivergenceSpec::Alpha { alpha: a, stabilized: false } => -(x.powf(a) - 1.0) / a,
            DivergenceSpec::Alpha { alpha: a, stabilized: true } => {
                ((1.0 - a) * x.powf(a) - 1.0) / (a * (a - 1.0))
            }
        }
    }

    /// `f(exp(l))`, with `l` clamped; the flag reports whether clamping
    /// happened.
    pub fn f_of_log(&self, l: f64) -> (f64, bool) {
        let (l, clamped) = clamp_log_ratio(l);
        let v = match *self {
            DivergenceSpec::Kl => -l,
            _ => self.f(l.exp()),
        };
        (v, clamped)
    }

    /// `F(exp(l))` with clamping, as for [`Self::f_of_log`].
    pub fn big_f_of_log(&self, l: f64) -> (f64, bool) {
        let (l, clamped) = clamp_log_ratio(l);
        let v = match *self {
            DivergenceSpec::Kl => 1.0 - l,
            _ => self.big_f(l.exp()),
        };
        (v, clamped)
    }

    /// Upper bound of the mutual information, `1/(α(1−α))`; infinite for KL.
    pub fn mi_upper_bound(&self) -> f64 {
        match *self {
            DivergenceSpec::Kl => f64::INFINITY,
            DivergenceSpec::Alpha { alpha, .. } => 1.0 / (alpha * (1.0 - alpha)),
        }
    }
}

/// `1/(α(1−α))`, the universal bound on α-divergence mutual information.
pub fn mi_upper_bound(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("α must lie in (0, 1), got {alpha}")));
    }
    Ok(1.0 / (alpha * (1.0 - alpha)))
}

/// Clamp a log-ratio to `[−700, 700]`.
pub fn clamp_log_ratio(l: f64) -> (f64, bool) {
    if l > LOG_RATIO_CLAMP {
        (LOG_RATIO_CLAMP, true)
    } else if l < -LOG_RATIO_CLAMP {
        (-LOG_RATIO_CLAMP, true)
    } else {
        (l, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_kinds() -> Vec<DivergenceSpec> {
        vec![
            DivergenceSpec::Kl,
            DivergenceSpec::alpha(0.25, false).unwrap(),
            DivergenceSpec::alpha(0.5, true).unwrap(),
            DivergenceSpec::alpha(0.75, false).unwrap(),
        ]
    }

    #[test]
    fn f_vanishes_at_one() {
        for d in all_kinds() {
            assert!(d.f_value(1.0).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn point_values() {
        let hat = DivergenceSpec::alpha(0.5, true).unwrap();
        assert_eq!(hat.f_value(0.0).unwrap(), 4.0);
        let plain = DivergenceSpec::alpha(0.5, false).unwrap();
        assert!((plain.f_value(4.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(DivergenceSpec::Kl.f_term(1.0).unwrap(), 1.0);
        assert!((hat.f_term(1.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(DivergenceSpec::Kl.f_value(0.0).is_err());
        assert!(DivergenceSpec::Kl.f_value(-1.0).is_err());
        assert!(DivergenceSpec::alpha(0.5, false).unwrap().f_value(0.0).is_err());
        assert!(DivergenceSpec::alpha(0.5, true).unwrap().f_value(-0.1).is_err());
    }

    #[test]
    fn alpha_guard() {
        assert!(DivergenceSpec::alpha(0.97, true).is_err());
        assert!(DivergenceSpec::alpha_unchecked_guard(0.97, true, true).is_ok());
        assert!(DivergenceSpec::alpha(0.0, true).is_err());
        assert!(DivergenceSpec::alpha(1.0, true).is_err());
    }

    #[test]
    fn upper_bound_values() {
        assert_eq!(mi_upper_bound(0.5).unwrap(), 4.0);
        assert!((mi_upper_bound(0.9).unwrap() - 100.0 / 9.0).abs() < 1e-12);
        assert!(mi_upper_bound(1.0 - 1e-12).unwrap() > 1e11);
        assert!(mi_upper_bound(1.5).is_err());
    }

    #[test]
    fn log_forms_match_direct_evaluation() {
        for d in all_kinds() {
            for &l in &[-3.0, -0.2, 0.0, 0.7, 2.5] {
                let (v, c) = d.f_of_log(l);
                assert!(!c);
                assert!((v - d.f(f64::exp(l))).abs() < 1e-12);
                let (v, _) = d.big_f_of_log(l);
                assert!((v - d.big_f(f64::exp(l))).abs() < 1e-12);
            }
        }
        assert!(DivergenceSpec::Kl.f_of_log(1e4).1);
    }
}
