//! Loop-event probabilities mapped to spin correlations.

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Spin;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    /// `⟨S¹ₓS¹_y⟩ = ⟨S³ₓS³_y⟩` for either family.
    Direction13,
    /// `⟨S²ₓS²_y⟩` for the family built from `Q`.
    Direction2,
    /// `⟨SⁱₓSⁱ_y⟩` for the family built from `P`, integer spin only.
    Su2Vector,
    /// `⟨(S³ₓ)²(S³_y)²⟩ − ⟨(S³ₓ)²⟩²` for the family built from `P`, integer
    /// spin only.
    Quadrupolar,
}

/// Factor `c` with `correlation = c · (event probability)`.
pub fn prefactor(kind: CorrelationKind, s: Spin) -> Result<f64> {
    let c = s.casimir();
    match kind {
        CorrelationKind::Direction13 | CorrelationKind::Direction2 => Ok(c / 3.0),
        CorrelationKind::Su2Vector | CorrelationKind::Quadrupolar if !s.is_integer() => Err(Error::NoRepresentation(
            format!("the P-family loop representation is signed for half-integer S = {s}"),
        )),
        CorrelationKind::Su2Vector => Ok(c / 3.0),
        CorrelationKind::Quadrupolar => {
            let v = s.value();
            Ok(c * (2.0 * v - 1.0) * (2.0 * v + 3.0) / 45.0)
        }
    }
}

/// Spin correlation from `κ = P(E)`, `κ⁺ = P(E⁺)` and `κ⁻ = P(E⁻)`.
pub fn spin_correlation(kind: CorrelationKind, s: Spin, kappa: f64, plus: f64, minus: f64) -> Result<f64> {
    let c = prefactor(kind, s)?;
    Ok(match kind {
        CorrelationKind::Direction13 | CorrelationKind::Quadrupolar => c * kappa,
        CorrelationKind::Direction2 | CorrelationKind::Su2Vector => c * (plus - minus),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinIdentity {
    /// `(2S+1)⁻¹ Σ_a a² = S(S+1)/3`.
    SumSq,
    /// `(2S+1)⁻¹ Σ_a a⁴ − (S(S+1)/3)² = S(S+1)(2S−1)(2S+3)/45`.
    SumQuarticCentered,
    /// `(2S+1)⁻¹ Σ_{a,b} (a−b)² = (2/3) S(S+1)(2S+1)`.
    PairSq,
}

/// Both sides of a spin-sum identity in exact arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IdentityValue {
    pub direct: Rational64,
    pub closed: Rational64,
}

pub fn spin_identity(which: SpinIdentity, s: Spin) -> IdentityValue {
    let m = Rational64::from_integer(s.multiplicity() as i64);
    let sv = s.rational();
    let one = Rational64::from_integer(1);
    let two = Rational64::from_integer(2);
    let three = Rational64::from_integer(3);
    let cas = sv * (sv + one);
    let a: Vec<Rational64> = s.magnetizations_exact().collect();
    let (direct, closed) = match which {
        SpinIdentity::SumSq => (a.iter().map(|x| x * x).sum::<Rational64>() / m, cas / three),
        SpinIdentity::SumQuarticCentered => {
            let q = a.iter().map(|x| x * x * x * x).sum::<Rational64>() / m;
            let s2 = a.iter().map(|x| x * x).sum::<Rational64>() / m;
            (
                q - s2 * s2,
                cas * (two * sv - one) * (two * sv + three) / Rational64::from_integer(45),
            )
        }
        SpinIdentity::PairSq => {
            let d = a.iter().flat_map(|x| a.iter().map(move |y| (x - y) * (x - y))).sum::<Rational64>() / m;
            (d, two / three * cas * m)
        }
    };
    IdentityValue { direct, closed }
}

/// `τ₀`, `τ₁` and `α = P(E⁺)/P(E)` for a nearest-neighbour pair at equal times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauAlpha {
    pub tau0: f64,
    pub tau1: f64,
    /// `None` when `P(E) = 0`.
    pub alpha: Option<f64>,
}

pub fn tau_alpha(p_plus: f64, p_minus: f64, s: Spin) -> TauAlpha {
    let c = 2.0 / 3.0 * s.casimir() * s.multiplicity() as f64;
    let p = p_plus + p_minus;
    TauAlpha { tau0: c * p_minus, tau1: c * p_plus, alpha: (p > 0.0).then(|| p_plus / p) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefactors() {
        assert_eq!(prefactor(CorrelationKind::Direction13, Spin::HALF).unwrap(), 0.25);
        assert!(prefactor(CorrelationKind::Quadrupolar, Spin::HALF).is_err());
        assert!(prefactor(CorrelationKind::Su2Vector, Spin::THREE_HALVES).is_err());
        assert!((prefactor(CorrelationKind::Quadrupolar, Spin::ONE).unwrap() - 2.0 / 9.0).abs() < 1e-15);
        let sp = Spin::from_twice(3).unwrap();
        // The quadrupolar factor vanishes at S = 1/2 through 2S − 1.
        let v = spin_identity(SpinIdentity::SumQuarticCentered, Spin::HALF);
        assert_eq!(v.direct, Rational64::from_integer(0));
        assert_eq!(spin_identity(SpinIdentity::SumQuarticCentered, sp).direct, Rational64::from_integer(1));
    }

    #[test]
    fn identities_small_spins() {
        assert_eq!(spin_identity(SpinIdentity::SumSq, Spin::HALF).direct, Rational64::new(1, 4));
        assert_eq!(spin_identity(SpinIdentity::SumSq, Spin::ONE).direct, Rational64::new(2, 3));
        assert_eq!(spin_identity(SpinIdentity::PairSq, Spin::ONE).direct, Rational64::from_integer(4));
        for twice in 1..=12 {
            let s = Spin::from_twice(twice).unwrap();
            for w in [SpinIdentity::SumSq, SpinIdentity::SumQuarticCentered, SpinIdentity::PairSq] {
                let v = spin_identity(w, s);
                assert_eq!(v.direct, v.closed, "{w:?} at S = {s}");
            }
        }
    }

    #[test]
    fn tau_alpha_limits() {
        let t = tau_alpha(0.4, 0.0, Spin::HALF);
        assert_eq!(t.tau0, 0.0);
        assert!((t.tau1 - 0.4).abs() < 1e-15);
        assert_eq!(t.alpha, Some(1.0));
        assert_eq!(tau_alpha(0.0, 0.0, Spin::ONE).alpha, None);
    }
}
