//! The `exact`, `integrals`, `pdtest` and `analyze` subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use randloop::graph::Graph;
use randloop::infrared::{integral_ij, sufficient_condition, BoundReport, IntegralPair};
use randloop::model::Spin;
use randloop::observables::{Estimate, LoopObserver, MeasureSettings};
use randloop::pdstats::{conjecture2_test, expected_pd_parameter, Conjecture2Report, CUTOFF_SWEEP, MIN_SAMPLES};
use randloop::quantum::{Family, Gibbs, SpinSystem};
use serde::{Deserialize, Serialize};

use crate::config::{parse_config, ExperimentConfig};
use crate::error::{io_err, json_err, CliError, CliResult};
use crate::output::sig17;
use crate::report::{self, KappaHat, SpinRow, TauAlphaReport};
use crate::simulate::{batch_size, checkpoint_dir, checkpoint_path, read_checkpoint};

// ---- exact ----

#[derive(Clone, Debug, Serialize)]
pub struct ExactCorrelation {
    pub y: usize,
    /// `⟨S³₀S³_y⟩`.
    pub s3s3: f64,
    /// The loop-event probability this implies: `P(E_{0,y,0})` for `h`,
    /// `P(E⁺) − P(E⁻)` for `h_tilde`.
    pub loop_event: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactFamily {
    pub family: Family,
    pub z: f64,
    pub log_z: f64,
    pub spectrum: Vec<f64>,
    pub correlations: Vec<ExactCorrelation>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactReport {
    pub beta: f64,
    pub u: f64,
    pub spin: Spin,
    pub vertex_count: usize,
    pub dimension: usize,
    pub families: Vec<ExactFamily>,
}

/// Exact diagonalization for the configured model: the `Q` family always,
/// the `P` family as well for integer spin.
pub fn exact(cfg: &ExperimentConfig, base: &Path, cap: usize) -> CliResult<ExactReport> {
    let m = &cfg.model;
    let spin = m
        .effective_spin()
        .ok_or_else(|| CliError::Validation(format!("exact needs θ = 2S+1 for a spin S, got θ = {}", m.theta)))?;
    let graph = m.load_graph(base).map_err(CliError::Validation)?;
    let sys = SpinSystem::new(&graph, spin, cap)?;
    let c = spin.casimir() / 3.0;
    let mut families = Vec::new();
    for family in [Family::H, Family::HTilde] {
        if family == Family::HTilde && !spin.is_integer() {
            continue;
        }
        let gibbs = Gibbs::new(&sys.hamiltonian(m.u, family)?, m.beta)?;
        let correlations = (0..graph.vertex_count())
            .map(|y| {
                let s3s3 = gibbs.expectation(&(sys.spin_op(3, 0) * sys.spin_op(3, y))).re;
                ExactCorrelation { y, s3s3, loop_event: s3s3 / c }
            })
            .collect();
        families.push(ExactFamily {
            family,
            z: gibbs.z(),
            log_z: gibbs.log_z(),
            spectrum: gibbs.spectrum(),
            correlations,
        });
    }
    Ok(ExactReport {
        beta: m.beta,
        u: m.u,
        spin,
        vertex_count: graph.vertex_count(),
        dimension: sys.dim(),
        families,
    })
}

// ---- integrals ----

/// Parses `a..b` or `a..=b` (both inclusive) or a single `d`.
pub fn parse_dim_range(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("expected a dimension range like 2..6, got {s:?}");
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => {
            let b = b.strip_prefix('=').unwrap_or(b);
            (a.trim().parse::<usize>().map_err(|_| bad())?, b.trim().parse::<usize>().map_err(|_| bad())?)
        }
        None => {
            let d = s.trim().parse::<usize>().map_err(|_| bad())?;
            (d, d)
        }
    };
    if lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct IntegralRow {
    pub d: usize,
    pub i: f64,
    pub j: f64,
    pub i_error: f64,
    pub j_error: f64,
    /// `(½(1−u) I_d J_d)^{−½}` at `u = 0` and `u = ½`.
    pub threshold_u0: f64,
    pub threshold_u_half: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primed: Option<IntegralPair>,
}

pub fn integrals(dims: &[usize], primed: bool) -> CliResult<Vec<IntegralRow>> {
    dims.iter()
        .map(|&d| {
            let p = integral_ij(d, false)?;
            Ok(IntegralRow {
                d,
                i: p.i.value,
                j: p.j.value,
                i_error: p.i.error,
                j_error: p.j.error,
                threshold_u0: sufficient_condition(Spin::HALF, 0.0, d)?.threshold,
                threshold_u_half: sufficient_condition(Spin::HALF, 0.5, d)?.threshold,
                primed: if primed && d <= 3 { Some(integral_ij(d, true)?) } else { None },
            })
        })
        .collect()
}

pub fn integrals_text(rows: &[IntegralRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>2}  {:>10}  {:>10}  {:>10}  {:>10}", "d", "I_d", "J_d", "u=0", "u=1/2");
    for r in rows {
        let _ = writeln!(
            s,
            "{:>2}  {:>10.6}  {:>10.6}  {:>10.5}  {:>10.5}",
            r.d, r.i, r.j, r.threshold_u0, r.threshold_u_half
        );
    }
    if rows.iter().any(|r| r.primed.is_some()) {
        let _ = writeln!(s, "\n{:>2}  {:>10}  {:>10}", "d", "I'_d", "J'_d");
        for r in rows {
            if let Some(p) = &r.primed {
                let _ = writeln!(s, "{:>2}  {:>10.6}  {:>10.6}", r.d, p.i.value, p.j.value);
            }
        }
    }
    s
}

pub fn integrals_csv(rows: &[IntegralRow]) -> String {
    let mut s = String::from("d,i,j,i_error,j_error,threshold_u0,threshold_u_half,i_primed,j_primed\n");
    for r in rows {
        let (ip, jp) = r.primed.map_or((String::new(), String::new()), |p| (sig17(p.i.value), sig17(p.j.value)));
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{ip},{jp}",
            r.d,
            sig17(r.i),
            sig17(r.j),
            sig17(r.i_error),
            sig17(r.j_error),
            sig17(r.threshold_u0),
            sig17(r.threshold_u_half)
        );
    }
    s
}

// ---- pdtest ----

#[derive(Deserialize)]
struct PartitionsInput {
    expected_pd: f64,
    partitions: Vec<Vec<f64>>,
}

fn partitions_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("partitions.json")
    } else {
        p.to_path_buf()
    }
}

/// Pools partitions from `partitions.json` files (or directories holding one)
/// and compares them with PD(ϑ). ϑ defaults to the value recorded in the
/// inputs, which must then agree.
pub fn pdtest(inputs: &[PathBuf], theta: Option<f64>, cutoffs: &[f64]) -> CliResult<Conjecture2Report> {
    let mut all = Vec::new();
    let mut recorded: Option<f64> = None;
    for p in inputs {
        let path = partitions_path(p);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let file: PartitionsInput = serde_json::from_str(&text).map_err(json_err(&path))?;
        if theta.is_none() {
            if let Some(r) = recorded.filter(|&r| r != file.expected_pd) {
                return Err(CliError::Validation(format!(
                    "inputs suggest different PD parameters ({r} and {}); pass --theta",
                    file.expected_pd
                )));
            }
        }
        recorded = Some(file.expected_pd);
        all.extend(file.partitions);
    }
    let vartheta = theta.or(recorded).ok_or_else(|| CliError::Usage("pdtest needs at least one input".into()))?;
    Ok(conjecture2_test(&all, vartheta, cutoffs)?)
}

// ---- analyze ----

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Outcome<T> {
    Value(T),
    Skipped { skipped: String },
}

impl<T> Outcome<T> {
    fn skipped(reason: impl Into<String>) -> Self {
        Outcome::Skipped { skipped: reason.into() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Analysis {
    pub chains: u64,
    /// Whether every chain has run its full plan.
    pub complete: bool,
    pub sweeps_done: Vec<u64>,
    pub observations: u64,
    pub theta: f64,
    pub u: f64,
    pub beta: f64,
    pub scalars: BTreeMap<&'static str, Estimate>,
    pub spin_correlations: Outcome<BTreeMap<&'static str, Vec<SpinRow>>>,
    pub kappa_hat: Outcome<Vec<KappaHat>>,
    pub tau_alpha: Outcome<TauAlphaReport>,
    pub infrared_bounds: Outcome<BoundReport>,
    pub poisson_dirichlet: Outcome<Conjecture2Report>,
}

/// Reloads the checkpoints of a `simulate` output directory, finished or not,
/// and derives spin correlations, κ̂, τ/α, infrared bounds and the
/// Poisson–Dirichlet comparison from the pooled observers.
pub fn analyze(dir: &Path) -> CliResult<Analysis> {
    let cfg_path = dir.join("config.toml");
    let text = std::fs::read_to_string(&cfg_path).map_err(io_err(&cfg_path))?;
    let cfg = parse_config(&text)?;
    let cp_dir = checkpoint_dir(dir);
    let mut merged: Option<LoopObserver> = None;
    let mut sweeps_done = Vec::new();
    let mut complete = true;
    let mut graph: Option<Arc<Graph>> = None;
    for i in 0..cfg.run.chains {
        let cp = read_checkpoint(&checkpoint_path(&cp_dir, i))?;
        let g = match &graph {
            Some(g) => g.clone(),
            None => Arc::new(Graph::from_descriptor(&cp.config.graph)?),
        };
        graph = Some(g.clone());
        let settings: MeasureSettings = cfg.observables.settings.clone();
        let mut obs = LoopObserver::new(g, cp.config.params.beta, settings, batch_size(&cfg.observables, &cp.plan), 0)?;
        let state = cp
            .observer
            .clone()
            .ok_or_else(|| CliError::Validation(format!("chain {i}: checkpoint has no observer state")))?;
        obs.restore_state(state)?;
        complete &= cp.sweeps_done >= cp.plan.burn_in_sweeps + cp.plan.measure_sweeps;
        sweeps_done.push(cp.sweeps_done);
        match merged.as_mut() {
            None => merged = Some(obs),
            Some(m) => m.merge(&obs)?,
        }
    }
    let obs = merged.ok_or_else(|| CliError::Validation("configuration has no chains".into()))?;
    let graph = obs.graph().clone();
    let table = obs.table();
    let m = &cfg.model;
    let spin = m.effective_spin();
    let no_spin = || format!("θ = {} is not 2S+1 for a spin S", m.theta);

    let spin_correlations = match spin {
        Some(s) => Outcome::Value(report::spin_rows(&table, s)),
        None => Outcome::skipped(no_spin()),
    };
    let kappa_hat = match report::kappa_hat_table(&table) {
        Some(h) => Outcome::Value(h),
        None => Outcome::skipped("needs a periodic cube with κ(x, 0) on the full lattice"),
    };
    let tau_alpha = match spin.and_then(|s| report::tau_alpha_report(&graph, &table, s)) {
        Some(t) => Outcome::Value(t),
        None => Outcome::skipped(if spin.is_none() { no_spin() } else { "no neighbour of vertex 0".into() }),
    };
    let infrared_bounds = match (spin, graph.cube(), report::reference_neighbor(&graph)) {
        (None, _, _) => Outcome::skipped(no_spin()),
        (_, None, _) | (_, _, None) => Outcome::skipped("needs a periodic cube"),
        (Some(s), Some(c), Some(y)) => {
            let p_edge = table.get(y, 0).map(|e| e.kappa.mean).unwrap_or(0.0);
            match BoundReport::new(s, m.u, c.dim, p_edge) {
                Ok(b) => Outcome::Value(b),
                Err(e @ randloop::Error::InvalidParameter(_)) => Outcome::skipped(e.to_string()),
                Err(e) => return Err(e.into()),
            }
        }
    };
    let bipartite = graph.bipartition().is_some();
    let poisson_dirichlet = if obs.partitions().len() < MIN_SAMPLES {
        Outcome::skipped(format!("{} partitions recorded, need {MIN_SAMPLES}", obs.partitions().len()))
    } else {
        Outcome::Value(conjecture2_test(obs.partitions(), expected_pd_parameter(m.theta, m.u, bipartite), &CUTOFF_SWEEP)?)
    };

    Ok(Analysis {
        chains: cfg.run.chains,
        complete,
        sweeps_done,
        observations: obs.estimate(randloop::observables::Obs::LoopCount).map_or(0, |e| e.n_samples),
        theta: m.theta,
        u: m.u,
        beta: m.beta,
        scalars: report::scalars(&obs),
        spin_correlations,
        kappa_hat,
        tau_alpha,
        infrared_bounds,
        poisson_dirichlet,
    })
}
