//! Chain orchestration for the `simulate` subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use randloop::graph::Graph;
use randloop::mcmc::{sub_seed, Chain, Checkpoint, RunPlan, Tally};
use randloop::model::ModelParams;
use randloop::observables::{Accumulator, Estimate, LoopObserver};
use randloop::pdstats::expected_pd_parameter;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Estimator, ExperimentConfig, Format, ModelConfig, ObservablesConfig, RunConfig};
use crate::error::{io_err, json_err, CliError, CliResult};
use crate::output::{write_atomic, write_csv, write_json};
use crate::report::{self, KappaHat, MinusEvents, Rates, TauAlphaReport};

/// Observer streams are seeded apart from the chain streams.
const OBSERVER_SALT: u64 = 0x6f62_7365_7276_6572;

#[derive(Clone, Debug, Default)]
pub struct SimulateOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    /// Stop every chain after this many sweeps in this invocation, leaving
    /// checkpoints to resume from.
    pub halt_after: Option<u64>,
}

pub enum SimulateOutcome {
    Finished { dir: PathBuf, summary: Box<Summary> },
    Halted { dir: PathBuf, sweeps_done: Vec<u64> },
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphInfo {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub bipartite: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cube: Option<(usize, usize)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Parameters {
    pub model: ModelConfig,
    pub run: RunConfig,
    pub observables: ObservablesConfig,
    pub graph: GraphInfo,
    pub batch_size: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainSummary {
    pub index: u64,
    pub seed: u64,
    pub observer_seed: u64,
    pub sweep_size: u64,
    pub sweeps: u64,
    pub steps: u64,
    pub acceptance: BTreeMap<&'static str, Rates>,
    pub final_transitions: usize,
    pub final_loops: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub parameters: Parameters,
    pub seed: u64,
    pub chains: Vec<ChainSummary>,
    pub acceptance: BTreeMap<&'static str, Rates>,
    pub observations: u64,
    pub scalars: BTreeMap<&'static str, Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub macroscopic_fraction: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_hat: Option<Vec<KappaHat>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_alpha: Option<TauAlphaReport>,
    pub minus_events: MinusEvents,
}

#[derive(Serialize)]
struct PartitionsFile<'a> {
    theta: f64,
    u: f64,
    bipartite: bool,
    /// PD parameter suggested for these θ and u.
    expected_pd: f64,
    /// Entries are loop lengths divided by `β|Λ|`, in decreasing order.
    normalization: &'static str,
    floor: f64,
    samples: usize,
    partitions: &'a [Vec<f64>],
}

struct ChainResult {
    chain: Chain,
    observer: LoopObserver,
    observer_seed: u64,
}

struct Ctx<'a> {
    params: ModelParams,
    graph: Arc<Graph>,
    plan: RunPlan,
    cfg: &'a ExperimentConfig,
    batch: u64,
    checkpoints: PathBuf,
    resume: Option<PathBuf>,
    halt_after: Option<u64>,
}

pub fn checkpoint_path(dir: &Path, chain: u64) -> PathBuf {
    dir.join(format!("chain-{chain:03}.json"))
}

/// `dir/checkpoints` if present, else `dir` itself.
pub fn checkpoint_dir(dir: &Path) -> PathBuf {
    let nested = dir.join("checkpoints");
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

pub fn read_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}

pub fn batch_size(oc: &ObservablesConfig, plan: &RunPlan) -> u64 {
    oc.batch_size.unwrap_or_else(|| Accumulator::batch_size_for(plan.observations()))
}

pub fn observer_seed(plan: &RunPlan, chain: u64) -> u64 {
    sub_seed(plan.seed ^ OBSERVER_SALT, chain)
}

fn run_one(ctx: &Ctx<'_>, index: u64) -> CliResult<ChainResult> {
    let chain_err = |source| CliError::Chain { chain: index, source };
    let obs_seed = observer_seed(&ctx.plan, index);
    let settings = ctx.cfg.observables.settings.clone();
    let mut observer =
        LoopObserver::new(ctx.graph.clone(), ctx.params.beta, settings, ctx.batch, obs_seed).map_err(chain_err)?;
    let mut chain = match &ctx.resume {
        Some(dir) => {
            let path = checkpoint_path(dir, index);
            let cp = read_checkpoint(&path)?;
            if cp.plan != ctx.plan || cp.chain_index != index || cp.config.params != ctx.params {
                return Err(CliError::Validation(format!(
                    "{}: checkpoint does not match this configuration",
                    path.display()
                )));
            }
            let state = cp
                .observer
                .clone()
                .ok_or_else(|| CliError::Validation(format!("{}: checkpoint has no observer state", path.display())))?;
            observer.restore_state(state).map_err(chain_err)?;
            Chain::resume(&cp, Some(ctx.graph.clone())).map_err(chain_err)?
        }
        None => Chain::new(ctx.params, ctx.graph.clone(), ctx.plan, index).map_err(chain_err)?,
    };
    let every = ctx.cfg.run.checkpoint_every.unwrap_or(u64::MAX);
    let mut budget = ctx.halt_after.unwrap_or(u64::MAX);
    let path = checkpoint_path(&ctx.checkpoints, index);
    while !chain.is_finished() && budget > 0 {
        // Segments end on multiples of `every`, so checkpoints fall on the
        // same sweeps however the run is split.
        let n = (every - chain.sweeps_done() % every).min(budget);
        chain.run_for(n, &mut observer).map_err(chain_err)?;
        budget -= n;
        let state = observer.save_state().map_err(chain_err)?;
        let text = serde_json::to_string(&chain.checkpoint(Some(state))).map_err(json_err(&path))?;
        write_atomic(&path, text.as_bytes())?;
    }
    Ok(ChainResult { chain, observer, observer_seed: obs_seed })
}

/// Runs all chains, merges them in chain order and writes the reports.
/// `base` is the directory relative to which `edge_list` is resolved.
pub fn simulate(
    cfg: &ExperimentConfig,
    config_text: &str,
    base: &Path,
    opts: &SimulateOptions,
) -> CliResult<SimulateOutcome> {
    let graph = Arc::new(cfg.model.load_graph(base).map_err(CliError::Validation)?);
    let params = cfg.model.params();
    params.validate()?;
    let mut plan = cfg.run.plan;
    if let Some(s) = opts.seed {
        plan.seed = s;
    }
    let dir = opts.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    let checkpoints = dir.join("checkpoints");
    std::fs::create_dir_all(&checkpoints).map_err(io_err(&checkpoints))?;
    write_atomic(&dir.join("config.toml"), config_text.as_bytes())?;

    let ctx = Ctx {
        params,
        graph: graph.clone(),
        plan,
        cfg,
        batch: batch_size(&cfg.observables, &plan),
        checkpoints,
        resume: opts.resume.as_deref().map(checkpoint_dir),
        halt_after: opts.halt_after,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let results: Vec<CliResult<ChainResult>> =
        pool.install(|| (0..cfg.run.chains).into_par_iter().map(|i| run_one(&ctx, i)).collect());
    let results = results.into_iter().collect::<CliResult<Vec<_>>>()?;

    if results.iter().any(|r| !r.chain.is_finished()) {
        return Ok(SimulateOutcome::Halted { dir, sweeps_done: results.iter().map(|r| r.chain.sweeps_done()).collect() });
    }
    let summary = finish(&dir, cfg, &graph, plan, ctx.batch, results)?;
    Ok(SimulateOutcome::Finished { dir, summary: Box::new(summary) })
}

fn finish(
    dir: &Path,
    cfg: &ExperimentConfig,
    graph: &Graph,
    plan: RunPlan,
    batch: u64,
    results: Vec<ChainResult>,
) -> CliResult<Summary> {
    let mut merged: Option<LoopObserver> = None;
    let mut chains = Vec::with_capacity(results.len());
    let mut pooled = [Tally::default(); 4];
    for r in results {
        let st = r.chain.state();
        let tallies: [Tally; 4] = randloop::mcmc::MoveType::ALL.map(|m| st.tally(m));
        for (p, t) in pooled.iter_mut().zip(&tallies) {
            p.proposed += t.proposed;
            p.accepted += t.accepted;
        }
        chains.push(ChainSummary {
            index: r.chain.chain_index(),
            seed: sub_seed(plan.seed, r.chain.chain_index()),
            observer_seed: r.observer_seed,
            sweep_size: r.chain.sweep_size(),
            sweeps: r.chain.sweeps_done(),
            steps: st.step_count(),
            acceptance: report::rates(&tallies),
            final_transitions: st.config().total_count(),
            final_loops: st.loops().loop_count(),
        });
        match merged.as_mut() {
            None => merged = Some(r.observer),
            Some(m) => m.merge(&r.observer)?,
        }
    }
    let obs = merged.expect("at least one chain");
    let table = obs.table();
    let oc = &cfg.observables;
    let spin = cfg.model.effective_spin();
    let bipartite = graph.bipartition().is_some();
    let summary = Summary {
        parameters: Parameters {
            model: cfg.model.clone(),
            run: RunConfig { plan, ..cfg.run.clone() },
            observables: oc.clone(),
            graph: GraphInfo {
                vertex_count: graph.vertex_count(),
                edge_count: graph.edge_count(),
                bipartite,
                cube: graph.cube().map(|c| (c.side, c.dim)),
            },
            batch_size: batch,
        },
        seed: plan.seed,
        chains,
        acceptance: report::rates(&pooled),
        observations: obs.estimate(randloop::observables::Obs::LoopCount).map_or(0, |e| e.n_samples),
        scalars: if oc.enabled(Estimator::Scalars) { report::scalars(&obs) } else { BTreeMap::new() },
        macroscopic_fraction: obs.macroscopic_fraction(),
        kappa_hat: if oc.enabled(Estimator::Fourier) { report::kappa_hat_table(&table) } else { None },
        tau_alpha: match spin {
            Some(s) if oc.enabled(Estimator::TauAlpha) => report::tau_alpha_report(graph, &table, s),
            _ => None,
        },
        minus_events: report::minus_events(&table),
    };

    let formats = &cfg.output.formats;
    if formats.contains(&Format::Csv) {
        write_csv(&dir.join("correlations.csv"), &report::csv_rows(&obs, &table, oc))?;
    }
    if formats.contains(&Format::Json) {
        write_json(&dir.join("summary.json"), &summary)?;
        if oc.enabled(Estimator::Partitions) {
            let m = &cfg.model;
            let parts = PartitionsFile {
                theta: m.theta,
                u: m.u,
                bipartite,
                expected_pd: expected_pd_parameter(m.theta, m.u, bipartite),
                normalization: "beta_volume",
                floor: oc.settings.partition_floor,
                samples: obs.partitions().len(),
                partitions: obs.partitions(),
            };
            write_json(&dir.join("partitions.json"), &parts)?;
        }
    }
    Ok(summary)
}
