//! Derived quantities shared by `simulate` and `analyze`.

use std::collections::BTreeMap;

use randloop::graph::Graph;
use randloop::mcmc::{MoveType, Tally};
use randloop::model::Spin;
use randloop::observables::{
    spin_correlation, tau_alpha, CorrelationKind, CorrelationTable, Estimate, LoopObserver, Obs, TauAlpha,
};
use serde::Serialize;

use crate::config::{Estimator, ObservablesConfig};
use crate::output::{join_coords, sig17, CsvRow};

pub const SCALARS: [Obs; 8] = [
    Obs::KappaTilde,
    Obs::LoopLengthSum,
    Obs::MacroFraction,
    Obs::SumSquares,
    Obs::CrossCount,
    Obs::BarCount,
    Obs::TransitionCount,
    Obs::LoopCount,
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KappaHat {
    /// `k = 2π m / L`.
    pub m: Vec<usize>,
    pub k: Vec<f64>,
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
}

/// κ̂(k, 0) at every dual momentum, when the table allows it.
pub fn kappa_hat_table(table: &CorrelationTable) -> Option<Vec<KappaHat>> {
    let (side, dim) = table.cube?;
    if !table.has_full_lattice() {
        return None;
    }
    let total = side.checked_pow(dim as u32)?;
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut m = Vec::with_capacity(dim);
        let mut r = idx;
        for _ in 0..dim {
            m.push(r % side);
            r /= side;
        }
        let k: Vec<f64> = m.iter().map(|&mi| 2.0 * std::f64::consts::PI * mi as f64 / side as f64).collect();
        let f = table.fourier(&k).ok()?;
        out.push(KappaHat { m, k, re: f.re, im: f.im, stderr: f.stderr });
    }
    Some(out)
}

/// The neighbour used for `P(E_{0,e₁,0})`: `e₁` on a cube, otherwise the
/// first neighbour of vertex 0.
pub fn reference_neighbor(g: &Graph) -> Option<usize> {
    match g.cube() {
        Some(_) => g.unit(0),
        None => g.neighbors(0).first().map(|&(y, _)| y),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TauAlphaReport {
    pub neighbor: usize,
    pub p_plus: Estimate,
    pub p_minus: Estimate,
    #[serde(flatten)]
    pub values: TauAlpha,
}

pub fn tau_alpha_report(g: &Graph, table: &CorrelationTable, spin: Spin) -> Option<TauAlphaReport> {
    let y = reference_neighbor(g)?;
    let e = table.get(y, 0)?;
    Some(TauAlphaReport { neighbor: y, p_plus: e.plus, p_minus: e.minus, values: tau_alpha(e.plus.mean, e.minus.mean, spin) })
}

/// E⁻ occurrences over the whole grid. All zero when `u = 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinusEvents {
    /// `Σ P̂(E⁻) n_samples` over grid points.
    pub weighted_count: f64,
    pub max_probability: f64,
    pub nonzero_points: usize,
}

pub fn minus_events(table: &CorrelationTable) -> MinusEvents {
    let mut m = MinusEvents { weighted_count: 0.0, max_probability: 0.0, nonzero_points: 0 };
    for e in &table.entries {
        m.weighted_count += e.minus.mean * e.minus.n_samples as f64;
        m.max_probability = m.max_probability.max(e.minus.mean);
        m.nonzero_points += usize::from(e.minus.mean > 0.0);
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rates {
    pub proposed: u64,
    pub accepted: u64,
    pub rate: f64,
}

pub fn move_name(m: MoveType) -> &'static str {
    match m {
        MoveType::CrossBirth => "cross_birth",
        MoveType::CrossDeath => "cross_death",
        MoveType::BarBirth => "bar_birth",
        MoveType::BarDeath => "bar_death",
    }
}

pub fn rates(tallies: &[Tally; 4]) -> BTreeMap<&'static str, Rates> {
    MoveType::ALL
        .iter()
        .zip(tallies)
        .map(|(&m, t)| (move_name(m), Rates { proposed: t.proposed, accepted: t.accepted, rate: t.rate() }))
        .collect()
}

pub fn scalars(obs: &LoopObserver) -> BTreeMap<&'static str, Estimate> {
    SCALARS.iter().filter_map(|&o| obs.estimate(o).map(|e| (o.name(), e))).collect()
}

fn displacement(g: &Graph, x: usize) -> String {
    g.coords(x).map_or_else(|| x.to_string(), |c| join_coords(&c))
}

fn row(observable: &str, x: String, k: String, t: String, e: &Estimate, value: f64, stderr: f64) -> CsvRow {
    CsvRow {
        observable: observable.to_string(),
        x,
        k,
        t,
        value: sig17(value),
        stderr: sig17(stderr),
        n_samples: e.n_samples,
        n_batches: e.n_batches,
    }
}

pub fn csv_rows(obs: &LoopObserver, table: &CorrelationTable, oc: &ObservablesConfig) -> Vec<CsvRow> {
    let g = obs.graph();
    let mut rows = Vec::new();
    if oc.enabled(Estimator::Correlations) {
        for e in &table.entries {
            for (name, est) in
                [("kappa", &e.kappa), ("kappa_plus", &e.plus), ("kappa_minus", &e.minus), ("kappa_diff", &e.diff)]
            {
                rows.push(row(name, displacement(g, e.x), String::new(), sig17(e.time), est, est.mean, est.stderr));
            }
        }
    }
    if oc.enabled(Estimator::Scalars) {
        for (name, est) in scalars(obs) {
            rows.push(row(name, String::new(), String::new(), String::new(), &est, est.mean, est.stderr));
        }
    }
    if oc.enabled(Estimator::Fourier) {
        if let (Some(hat), Some(origin)) = (kappa_hat_table(table), table.get(0, 0)) {
            for h in hat {
                rows.push(row("kappa_hat", String::new(), join_coords(&h.m), sig17(0.0), &origin.kappa, h.re, h.stderr));
            }
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpinRow {
    pub x: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<usize>>,
    pub time: f64,
    pub value: f64,
    pub stderr: f64,
}

/// `⟨S³₀S³ₓ(t)⟩` from the loop table, for the `Q` family (all spins) and the
/// `P` family (integer spin).
pub fn spin_rows(table: &CorrelationTable, s: Spin) -> BTreeMap<&'static str, Vec<SpinRow>> {
    let mut out = BTreeMap::new();
    for (name, kind) in [("h", CorrelationKind::Direction13), ("h_tilde", CorrelationKind::Su2Vector)] {
        let Ok(c) = randloop::observables::prefactor(kind, s) else { continue };
        let rows = table
            .entries
            .iter()
            .map(|e| {
                let value = spin_correlation(kind, s, e.kappa.mean, e.plus.mean, e.minus.mean).expect("prefactor exists");
                let se = if kind == CorrelationKind::Direction13 { e.kappa.stderr } else { e.diff.stderr };
                SpinRow { x: e.x, coords: e.coords.clone(), time: e.time, value, stderr: c * se }
            })
            .collect();
        out.insert(name, rows);
    }
    out
}
