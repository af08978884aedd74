//! Infrared-bound integrals and the lower bounds built from them.
//!
//! With `C(k) = Σᵢ cos kᵢ` and `k` uniform on `[−π, π]^d`,
//! `I_d = E[√((d+C)/(d−C)) (C/d)₊]`, `J_d = E[√((d+C)/(d−C))]`, and the
//! primed variants replace the square root by `√(d/(d−C))`.
//!
//! The expectation only depends on the law of `C`, a sum of independent
//! `cos kᵢ`. Grouping the cosines in pairs, each pair has the closed-form
//! density `1/(2π AGM(1, |c|/2))` on `[−2, 2]` and a lone cosine has
//! `1/(π√(1−c²))`. The integral becomes an `⌈d/2⌉`-fold nested integral
//! evaluated with tanh-sinh rules split at every point where the integrand
//! can be non-smooth (integer partial sums). An independent k-space
//! quadrature for `d ≤ 3` serves as a cross-check.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Spin;

/// `ε(k) = 2 Σᵢ (1 − cos kᵢ)`.
pub fn dispersion(k: &[f64]) -> f64 {
    k.iter().map(|x| 4.0 * (x / 2.0).sin().powi(2)).sum()
}

/// Tanh-sinh nodes on `(−1, 1)` for a fixed step.
#[derive(Clone, Debug)]
struct Rule {
    /// (sign of abscissa, distance `1 − |x|` to the nearer endpoint, weight)
    nodes: Vec<(f64, f64, f64)>,
}

impl Rule {
    fn new(h: f64) -> Self {
        let t_max = 4.0;
        let n = (t_max / h).ceil() as i64;
        let mut nodes = Vec::with_capacity(2 * n as usize + 1);
        for k in -n..=n {
            let t = k as f64 * h;
            let u = PI / 2.0 * t.sinh();
            let gap = 2.0 / ((2.0 * u.abs()).exp() + 1.0);
            let w = h * PI / 2.0 * t.cosh() / u.cosh().powi(2);
            if gap > 0.0 && w > 0.0 {
                nodes.push((t.signum(), gap, w));
            }
        }
        Rule { nodes }
    }

    fn integrate<const N: usize>(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> [f64; N]) -> [f64; N] {
        let half = (b - a) / 2.0;
        let mid = (a + b) / 2.0;
        let mut acc = [0.0; N];
        for &(sign, gap, w) in &self.nodes {
            let x = if sign > 0.0 {
                b - half * gap
            } else if sign < 0.0 {
                a + half * gap
            } else {
                mid
            };
            if x <= a || x >= b {
                continue;
            }
            let v = f(x);
            for (s, vi) in acc.iter_mut().zip(v) {
                *s += w * half * vi;
            }
        }
        acc
    }

    /// Integral over `[a, b]` split at the given interior points.
    fn integrate_split<const N: usize>(
        &self,
        a: f64,
        b: f64,
        breaks: &mut Vec<f64>,
        mut f: impl FnMut(f64) -> [f64; N],
    ) -> [f64; N] {
        breaks.retain(|&x| x > a && x < b);
        breaks.push(a);
        breaks.push(b);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-13);
        let mut acc = [0.0; N];
        for w in breaks.windows(2) {
            let v = self.integrate(w[0], w[1], &mut f);
            for (s, vi) in acc.iter_mut().zip(v) {
                *s += vi;
            }
        }
        acc
    }
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let next = ((a + b) / 2.0, (a * b).sqrt());
        a = next.0;
        b = next.1;
    }
    a
}

/// Density of `cos k` (`r = 1`) or `cos k₁ + cos k₂` (`r = 2`).
fn cosine_density(r: u32, x: f64) -> f64 {
    match r {
        1 => {
            let g = (1.0 - x) * (1.0 + x);
            if g <= 0.0 {
                0.0
            } else {
                1.0 / (PI * g.sqrt())
            }
        }
        2 => {
            if x.abs() >= 2.0 || x == 0.0 {
                0.0
            } else {
                1.0 / (2.0 * PI * agm(1.0, x.abs() / 2.0))
            }
        }
        _ => unreachable!("cosine groups have one or two terms"),
    }
}

/// `√((d+c)/(d−c))` or `√(d/(d−c))`, together with its product with `(c/d)₊`.
fn integrand(d: f64, primed: bool, c: f64, gap: f64) -> [f64; 2] {
    if gap <= 0.0 {
        return [0.0, 0.0];
    }
    let num = if primed { d } else { (d + c).max(0.0) };
    let j = (num / gap).sqrt();
    [j * (c / d).max(0.0), j]
}

fn density_nested(rule: &Rule, radii: &[u32], d: f64, primed: bool, s: f64) -> [f64; 2] {
    let Some((&r, rest)) = radii.split_first() else {
        return integrand(d, primed, s, d - s);
    };
    let rf = r as f64;
    let mut breaks = vec![0.0];
    let lo = (s - rf).ceil() as i64;
    let hi = (s + rf).floor() as i64;
    for n in lo..=hi {
        breaks.push(n as f64 - s);
    }
    rule.integrate_split(-rf, rf, &mut breaks, |x| {
        let q = cosine_density(r, x);
        if q == 0.0 {
            return [0.0, 0.0];
        }
        let v = density_nested(rule, rest, d, primed, s + x);
        [q * v[0], q * v[1]]
    })
}

fn radii_for(d: usize) -> Vec<u32> {
    let mut r = vec![2; d / 2];
    if d % 2 == 1 {
        r.push(1);
    }
    r
}

/// Density-route evaluation with step `h`. The outermost variable is split
/// across threads and summed in a fixed order.
fn density_route(d: usize, primed: bool, h: f64) -> [f64; 2] {
    let rule = Rule::new(h);
    let radii = radii_for(d);
    let df = d as f64;
    let (&r, rest) = radii.split_first().expect("d >= 1");
    let rf = r as f64;
    let mut breaks = vec![-rf, 0.0, rf];
    for n in -(r as i64)..=(r as i64) {
        breaks.push(n as f64);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let pieces: Vec<[f64; 2]> = breaks
        .windows(2)
        .collect::<Vec<_>>()
        .into_par_iter()
        .flat_map_iter(|w| {
            let (a, b) = (w[0], w[1]);
            let half = (b - a) / 2.0;
            let mid = (a + b) / 2.0;
            rule.nodes.iter().map(move |&(sign, gap, wt)| (a, b, half, mid, sign, gap, wt))
        })
        .map(|(a, b, half, mid, sign, gap, wt)| {
            let x = if sign > 0.0 {
                b - half * gap
            } else if sign < 0.0 {
                a + half * gap
            } else {
                mid
            };
            if x <= a || x >= b {
                return [0.0, 0.0];
            }
            let q = cosine_density(r, x);
            if q == 0.0 {
                return [0.0, 0.0];
            }
            let v = density_nested(&rule, rest, df, primed, x);
            [wt * half * q * v[0], wt * half * q * v[1]]
        })
        .collect();
    pieces.iter().fold([0.0, 0.0], |acc, v| [acc[0] + v[0], acc[1] + v[1]])
}

/// One integral value with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

/// `(I_d, J_d)` or `(I′_d, J′_d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralPair {
    pub d: usize,
    pub primed: bool,
    pub i: Quadrature,
    pub j: Quadrature,
}

/// Absolute error target for `integral_ij`.
pub fn error_target(d: usize) -> f64 {
    if d <= 4 {
        1e-5
    } else {
        1e-4
    }
}

fn step_for(d: usize) -> f64 {
    match d {
        0..=4 => 1.0 / 16.0,
        5 | 6 => 1.0 / 8.0,
        _ => 1.0 / 4.0,
    }
}

fn compute_ij(d: usize, primed: bool) -> Result<IntegralPair> {
    let h = step_for(d);
    let fine = density_route(d, primed, h);
    let coarse = density_route(d, primed, 2.0 * h);
    let pair = IntegralPair {
        d,
        primed,
        i: Quadrature { value: fine[0], error: (fine[0] - coarse[0]).abs() },
        j: Quadrature { value: fine[1], error: (fine[1] - coarse[1]).abs() },
    };
    let target = error_target(d);
    for (name, q) in [("I", pair.i), ("J", pair.j)] {
        if !(q.error <= target) || !q.value.is_finite() {
            let tick = if primed { "'" } else { "" };
            return Err(Error::QuadratureTarget { what: format!("{name}{tick}_{d}"), estimate: q.error, target });
        }
    }
    Ok(pair)
}

fn cache() -> &'static Mutex<HashMap<(usize, bool), IntegralPair>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), IntegralPair>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `I_d` and `J_d` (or the primed pair) for `2 ≤ d ≤ 8`. Results are cached
/// per process.
pub fn integral_ij(d: usize, primed: bool) -> Result<IntegralPair> {
    if !(2..=8).contains(&d) {
        return Err(Error::InvalidParameter(format!("dimension must lie in 2..=8, got {d}")));
    }
    if let Some(p) = cache().lock().expect("integral cache poisoned").get(&(d, primed)) {
        return Ok(*p);
    }
    let p = compute_ij(d, primed)?;
    cache().lock().expect("integral cache poisoned").insert((d, primed), p);
    Ok(p)
}

fn kspace_nested(rule: &Rule, left: usize, d: f64, primed: bool, cos_sum: f64, gap: f64) -> [f64; 2] {
    if left == 0 {
        return integrand(d, primed, cos_sum, gap);
    }
    let m = (left - 1) as i64;
    let mut breaks = Vec::new();
    for n in -m..=m {
        let target = n as f64 - cos_sum;
        if target.abs() < 1.0 {
            breaks.push(target.acos());
        }
    }
    // Near the origin the integrand varies on the scale |k_outer|; geometric
    // breakpoints keep that scale resolved.
    let rho = (2.0 * gap).sqrt();
    if left < d as usize && rho > 1e-12 {
        let mut x = rho;
        while x < PI {
            breaks.push(x);
            x *= 4.0;
        }
    }
    rule.integrate_split(0.0, PI, &mut breaks, |k| {
        let half_sin = (k / 2.0).sin();
        kspace_nested(rule, left - 1, d, primed, cos_sum + k.cos(), gap + 2.0 * half_sin * half_sin)
    })
}

/// Direct quadrature over `[0, π]^d` for `1 ≤ d ≤ 3`, used to cross-check the
/// density route. Returns `[I, J]`.
pub fn integral_ij_kspace(d: usize, primed: bool, h: f64) -> Result<[f64; 2]> {
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidParameter(format!("k-space route supports d <= 3, got {d}")));
    }
    let rule = Rule::new(h);
    let v = kspace_nested(&rule, d, d as f64, primed, 0.0, 0.0);
    let norm = PI.powi(d as i32);
    Ok([v[0] / norm, v[1] / norm])
}

/// `(½(1−u) I_d J_d)^{−½}` and whether `2S+1` lies below it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SufficientCondition {
    pub threshold: f64,
    pub satisfied: bool,
}

fn check_u(u: f64) -> Result<()> {
    if (0.0..=0.5).contains(&u) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("the infrared bound needs u in [0, 1/2], got {u}")))
    }
}

pub fn sufficient_condition(s: Spin, u: f64, d: usize) -> Result<SufficientCondition> {
    check_u(u)?;
    let p = integral_ij(d, false)?;
    let threshold = (0.5 * (1.0 - u) * p.i.value * p.j.value).powf(-0.5);
    Ok(SufficientCondition { threshold, satisfied: (s.multiplicity() as f64) < threshold })
}

/// Both lower bounds from given integral values.
pub fn bounds_from(s: Spin, u: f64, p_edge: f64, pair: &IntegralPair) -> Result<(f64, f64)> {
    check_u(u)?;
    if !(0.0..=1.0).contains(&p_edge) {
        return Err(Error::InvalidParameter(format!("edge probability must lie in [0, 1], got {p_edge}")));
    }
    let m = s.multiplicity() as f64;
    let factor = if pair.primed { m } else { m * FRAC_1_SQRT_2 } * (1.0 - u).sqrt() * p_edge.sqrt();
    Ok((1.0 - factor * pair.j.value, p_edge - factor * pair.i.value))
}

/// Lower bounds on the macroscopic-loop density in terms of `P(E_{0,e₁,0})`.
pub fn theorem_bounds(s: Spin, u: f64, d: usize, p_edge: f64, primed: bool) -> Result<(f64, f64)> {
    check_u(u)?;
    let pair = integral_ij(d, primed)?;
    bounds_from(s, u, p_edge, &pair)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub d: usize,
    pub u: f64,
    pub spin: Spin,
    pub integrals: IntegralPair,
    pub primed_integrals: Option<IntegralPair>,
    pub p_edge: f64,
    pub bound1: f64,
    pub bound2: f64,
    pub primed_bounds: Option<(f64, f64)>,
    /// In `d = 2` the bound holds with the `β` and `L` limits interchanged.
    pub limit_order_caveat: bool,
}

impl BoundReport {
    pub fn new(s: Spin, u: f64, d: usize, p_edge: f64) -> Result<Self> {
        let integrals = integral_ij(d, false)?;
        let (bound1, bound2) = bounds_from(s, u, p_edge, &integrals)?;
        let primed_integrals = if d <= 3 { Some(integral_ij(d, true)?) } else { None };
        let primed_bounds = primed_integrals.as_ref().map(|p| bounds_from(s, u, p_edge, p)).transpose()?;
        Ok(BoundReport {
            d,
            u,
            spin: s,
            integrals,
            primed_integrals,
            p_edge,
            bound1,
            bound2,
            primed_bounds,
            limit_order_caveat: d == 2,
        })
    }
}

/// Vertices `(e_a − 𝟙/(2S+1))/√2` of the regular simplex, written in an
/// orthonormal basis of the complement of `𝟙`.
pub fn simplex_vectors(s: Spin) -> Vec<Vec<f64>> {
    let n = s.multiplicity();
    // Helmert basis: u_k ∝ (1, …, 1, −k, 0, …) with k ones.
    (0..n)
        .map(|a| {
            (1..n)
                .map(|k| {
                    let norm = ((k * (k + 1)) as f64).sqrt();
                    let comp = if a < k {
                        1.0
                    } else if a == k {
                        -(k as f64)
                    } else {
                        0.0
                    };
                    FRAC_1_SQRT_2 * comp / norm
                })
                .collect()
        })
        .collect()
}
