use std::fmt;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A spin quantum number `S ∈ {1/2, 1, 3/2, ...}`, stored as `2S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Spin(u32);

impl Spin {
    pub const HALF: Spin = Spin(1);
    pub const ONE: Spin = Spin(2);
    pub const THREE_HALVES: Spin = Spin(3);

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::InvalidParameter("spin must be at least 1/2".into()));
        }
        Ok(Spin(twice))
    }

    pub fn from_f64(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !(twice.is_finite() && twice >= 1.0 && (twice - twice.round()).abs() < 1e-12) {
            return Err(Error::InvalidParameter(format!("{s} is not a positive half-integer")));
        }
        Self::from_twice(twice.round() as u32)
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    pub fn rational(self) -> Rational64 {
        Rational64::new(i64::from(self.0), 2)
    }

    /// Local Hilbert space dimension `2S+1`, which is also the loop weight θ.
    pub fn multiplicity(self) -> usize {
        self.0 as usize + 1
    }

    pub fn is_integer(self) -> bool {
        self.0.is_multiple_of(2)
    }

    /// `S(S+1)`.
    pub fn casimir(self) -> f64 {
        let s = self.value();
        s * (s + 1.0)
    }

    /// The `S^3` eigenvalues `S, S-1, ..., -S`, in basis order.
    pub fn magnetizations(self) -> impl Iterator<Item = f64> {
        let twice = self.0 as i64;
        (0..=twice).map(move |i| (twice - 2 * i) as f64 / 2.0)
    }

    /// Same as [`Spin::magnetizations`] in exact arithmetic.
    pub fn magnetizations_exact(self) -> impl Iterator<Item = Rational64> {
        let twice = self.0 as i64;
        (0..=twice).map(move |i| Rational64::new(twice - 2 * i, 2))
    }
}

impl TryFrom<f64> for Spin {
    type Error = Error;
    fn try_from(s: f64) -> Result<Self> {
        Spin::from_f64(s)
    }
}

impl From<Spin> for f64 {
    fn from(s: Spin) -> f64 {
        s.value()
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Target measure `θ^{|L(ω)|} dρ_u(ω)` on `E × [0, β)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub u: f64,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin: Option<Spin>,
}

impl ModelParams {
    pub fn new(beta: f64, u: f64, theta: f64) -> Result<Self> {
        let p = Self { beta, u, theta, spin: None };
        p.validate()?;
        Ok(p)
    }

    /// θ = 2S+1.
    pub fn with_spin(beta: f64, u: f64, spin: Spin) -> Result<Self> {
        let p = Self { beta, u, theta: spin.multiplicity() as f64, spin: Some(spin) };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.u) {
            return Err(Error::InvalidParameter(format!("u must lie in [0, 1], got {}", self.u)));
        }
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::InvalidParameter(format!("theta must be > 0, got {}", self.theta)));
        }
        if let Some(s) = self.spin {
            if self.theta != s.multiplicity() as f64 {
                return Err(Error::InvalidParameter(format!(
                    "theta = {} but 2S+1 = {} for S = {s}",
                    self.theta,
                    s.multiplicity()
                )));
            }
        }
        Ok(())
    }
}
