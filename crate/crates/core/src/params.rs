//! Parameter types shared by the finite-size and asymptotic modules.

use num_rational::Rational64;
use num_traits::{FromPrimitive, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Finite-size parameters `(θ, α, M)` of the ensemble, `θ = β/2`.
///
/// `θ` and `α` are stored as exact rationals so that the exact-moment engine
/// sees precisely the same parameters as the samplers. Floating-point inputs
/// are converted through [`EnsembleParams::new`], which finds the closest
/// rational with a bounded denominator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EnsembleParams {
    theta: Rational64,
    alpha: Rational64,
    m_param: usize,
}

impl EnsembleParams {
    pub fn new(theta: f64, alpha: f64, m_param: usize) -> Result<Self> {
        let theta = to_ratio(theta, "theta")?;
        let alpha = to_ratio(alpha, "alpha")?;
        Self::from_ratios(theta, alpha, m_param)
    }

    pub fn from_ratios(theta: Rational64, alpha: Rational64, m_param: usize) -> Result<Self> {
        if theta <= Rational64::zero() {
            return domain(format!("theta must be positive, got {theta}"));
        }
        if alpha <= Rational64::zero() {
            return domain(format!("alpha must be positive, got {alpha}"));
        }
        if m_param == 0 {
            return domain("M must be at least 1");
        }
        Ok(Self {
            theta,
            alpha,
            m_param,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta.to_f64().unwrap()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.to_f64().unwrap()
    }

    pub fn theta_ratio(&self) -> Rational64 {
        self.theta
    }

    pub fn alpha_ratio(&self) -> Rational64 {
        self.alpha
    }

    pub fn m_param(&self) -> usize {
        self.m_param
    }

    /// Number of particles on level `n`, i.e. `min(n, M)`.
    pub fn level_len(&self, n: usize) -> usize {
        n.min(self.m_param)
    }

    pub fn with_theta(&self, theta: Rational64) -> Result<Self> {
        Self::from_ratios(theta, self.alpha, self.m_param)
    }
}

impl Serialize for EnsembleParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            theta: f64,
            alpha: f64,
            m: usize,
        }
        Repr {
            theta: self.theta(),
            alpha: self.alpha(),
            m: self.m_param,
        }
        .serialize(s)
    }
}

fn to_ratio(x: f64, name: &str) -> Result<Rational64> {
    if !x.is_finite() || x <= 0.0 {
        return domain(format!("{name} must be a positive finite number, got {x}"));
    }
    if x.fract() == 0.0 && x < 1e15 {
        return Ok(Rational64::from_integer(x as i64));
    }
    Rational64::approximate_float(x)
        .or_else(|| Rational64::from_f64(x))
        .ok_or_else(|| crate::Error::Domain(format!("{name}={x} has no rational approximation")))
}

/// Rescaled parameters `(M̂, α̂)` of the large-`L` regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HatParams {
    pub m_hat: f64,
    pub alpha_hat: f64,
}

impl HatParams {
    pub fn new(m_hat: f64, alpha_hat: f64) -> Result<Self> {
        if !(m_hat > 0.0 && m_hat.is_finite()) {
            return domain(format!("m_hat must be positive, got {m_hat}"));
        }
        if !(alpha_hat > 0.0 && alpha_hat.is_finite()) {
            return domain(format!("alpha_hat must be positive, got {alpha_hat}"));
        }
        Ok(Self { m_hat, alpha_hat })
    }

    /// Finite-size parameters at scale `L`: `M = ⌊L M̂⌋`, `α = ⌊L α̂⌋`.
    pub fn at_scale(&self, theta: f64, scale: usize) -> Result<EnsembleParams> {
        let l = scale as f64;
        let m = (l * self.m_hat).floor() as usize;
        let alpha = (l * self.alpha_hat).floor();
        EnsembleParams::new(theta, alpha, m)
    }
}

/// Rescaled level height `N̂`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LevelHeight(f64);

impl LevelHeight {
    pub fn new(n_hat: f64) -> Result<Self> {
        if !(n_hat > 0.0 && n_hat.is_finite()) {
            return domain(format!("level height must be positive, got {n_hat}"));
        }
        Ok(Self(n_hat))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `⌊L N̂⌋`.
    pub fn level_at(self, scale: usize) -> usize {
        (scale as f64 * self.0).floor() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_inputs_become_exact_rationals() {
        let p = EnsembleParams::new(0.5, 3.0, 2).unwrap();
        assert_eq!(p.theta_ratio(), Rational64::new(1, 2));
        assert_eq!(p.alpha_ratio(), Rational64::from_integer(3));
        let p = EnsembleParams::new(1e4, 2.0, 3).unwrap();
        assert_eq!(p.theta_ratio(), Rational64::from_integer(10_000));
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(EnsembleParams::new(0.0, 1.0, 1).is_err());
        assert!(EnsembleParams::new(1.0, -1.0, 1).is_err());
        assert!(EnsembleParams::new(1.0, 1.0, 0).is_err());
        assert!(HatParams::new(0.0, 1.0).is_err());
        assert!(LevelHeight::new(-0.5).is_err());
    }

    #[test]
    fn scale_floors() {
        let hp = HatParams::new(1.0, 0.5).unwrap();
        let p = hp.at_scale(1.0, 9).unwrap();
        assert_eq!(p.m_param(), 9);
        assert_eq!(p.alpha(), 4.0);
        assert_eq!(LevelHeight::new(0.5).unwrap().level_at(9), 4);
    }
}
