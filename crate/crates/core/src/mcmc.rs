//! Metropolis–Hastings birth–death sampler for `θ^{|L(ω)|} dρ_u(ω)`.
//!
//! Each proposal picks one of cross-birth, cross-death, bar-birth, bar-death
//! uniformly. A birth puts a point of that kind at a uniform edge and time and
//! is accepted with probability `min(1, θ^Δ μ/(n+1))`; a death removes a
//! uniform existing point of that kind with probability `min(1, θ^Δ n/μ)`.
//! Here `μ` is the total Poisson mass of the kind (`uβ|E|` or `(1−u)β|E|`),
//! `n` the current count and `Δ` the change in the number of loops.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::loopconfig::{
    sample_poisson, trace_loops, ConfigDump, Kind, LoopConfig, LoopSet, ModelParams, Transition, TransitionId,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunPlan {
    pub burn_in_sweeps: u64,
    pub measure_sweeps: u64,
    pub thinning: u64,
    /// Proposals per sweep; `None` means `⌈β|E|⌉`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_size: Option<u64>,
    pub seed: u64,
}

impl RunPlan {
    pub fn new(burn_in_sweeps: u64, measure_sweeps: u64, seed: u64) -> Self {
        Self { burn_in_sweeps, measure_sweeps, thinning: 1, sweep_size: None, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thinning == 0 {
            return Err(Error::InvalidParameter("thinning must be at least 1".into()));
        }
        if self.sweep_size == Some(0) {
            return Err(Error::InvalidParameter("sweep_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolved_sweep_size(&self, params: &ModelParams, graph: &Graph) -> u64 {
        self.sweep_size
            .unwrap_or_else(|| ((params.beta * graph.edge_count() as f64).ceil() as u64).max(1))
    }

    /// Number of observations the plan will make.
    pub fn observations(&self) -> u64 {
        self.measure_sweeps / self.thinning.max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveType {
    CrossBirth,
    CrossDeath,
    BarBirth,
    BarDeath,
}

impl MoveType {
    pub const ALL: [MoveType; 4] = [MoveType::CrossBirth, MoveType::CrossDeath, MoveType::BarBirth, MoveType::BarDeath];

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub proposed: u64,
    pub accepted: u64,
}

impl Tally {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// A tentative single-point change to ω.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Modification {
    Insert(Transition),
    Remove(TransitionId),
}

pub fn birth_acceptance(theta: f64, delta: i32, mu: f64, n: usize) -> f64 {
    (theta.powi(delta) * mu / (n as f64 + 1.0)).min(1.0)
}

pub fn death_acceptance(theta: f64, delta: i32, mu: f64, n: usize) -> f64 {
    (theta.powi(delta) * n as f64 / mu).min(1.0)
}

/// Hash of `(seed, index)` used to seed independent chains.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    splitmix(splitmix(seed) ^ splitmix(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// A realization with its loops kept in sync, plus the generator.
#[derive(Clone, Debug)]
pub struct ChainState {
    config: LoopConfig,
    loops: LoopSet,
    rng: ChaCha8Rng,
    step_count: u64,
    tallies: [Tally; 4],
    mu: [f64; 2],
    max_transitions: Option<usize>,
}

impl ChainState {
    /// Starts from a fresh draw of ρ_u.
    pub fn new(params: ModelParams, graph: Arc<Graph>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = sample_poisson(&params, graph, &mut rng)?;
        Ok(Self::from_parts(config, rng))
    }

    pub fn from_parts(config: LoopConfig, rng: ChaCha8Rng) -> Self {
        let p = config.params();
        let mass = p.beta * config.graph().edge_count() as f64;
        let mu = [p.u * mass, (1.0 - p.u) * mass];
        let loops = trace_loops(&config);
        Self { config, loops, rng, step_count: 0, tallies: [Tally::default(); 4], mu, max_transitions: None }
    }

    pub fn config(&self) -> &LoopConfig {
        &self.config
    }

    pub fn loops(&self) -> &LoopSet {
        &self.loops
    }

    pub fn params(&self) -> &ModelParams {
        self.config.params()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn tally(&self, m: MoveType) -> Tally {
        self.tallies[m.index()]
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Conditions the chain on `|ω| ≤ cap` by rejecting births beyond it.
    pub fn set_max_transitions(&mut self, cap: Option<usize>) {
        self.max_transitions = cap;
    }

    /// Poisson mass `μ` of a kind.
    pub fn mass(&self, kind: Kind) -> f64 {
        self.mu[kind_index(kind)]
    }

    pub fn delta_loops(&self, m: &Modification) -> Result<i32> {
        match m {
            Modification::Insert(tr) => self.loops.delta_insert(&self.config, tr),
            Modification::Remove(id) => self.loops.delta_remove(&self.config, *id),
        }
    }

    pub fn propose_birth(&mut self, kind: Kind) -> Result<bool> {
        self.step_count += 1;
        let mv = match kind {
            Kind::Cross => MoveType::CrossBirth,
            Kind::DoubleBar => MoveType::BarBirth,
        };
        self.tallies[mv.index()].proposed += 1;
        let mu = self.mass(kind);
        if mu == 0.0 || self.max_transitions.is_some_and(|c| self.config.total_count() >= c) {
            return Ok(false);
        }
        let tr = Transition {
            edge: self.rng.random_range(0..self.config.graph().edge_count()),
            time: self.rng.random::<f64>() * self.config.beta(),
            kind,
        };
        let delta = match self.loops.delta_insert(&self.config, &tr) {
            Ok(d) => d,
            Err(Error::TimeCollision { .. }) | Err(Error::InvalidParameter(_)) => return Ok(false),
            Err(e) => return Err(e),
        };
        let a = birth_acceptance(self.params().theta, delta, mu, self.config.count(kind));
        if self.rng.random::<f64>() < a {
            self.loops.insert(&mut self.config, tr)?;
            self.tallies[mv.index()].accepted += 1;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn propose_death(&mut self, kind: Kind) -> Result<bool> {
        self.step_count += 1;
        let mv = match kind {
            Kind::Cross => MoveType::CrossDeath,
            Kind::DoubleBar => MoveType::BarDeath,
        };
        self.tallies[mv.index()].proposed += 1;
        let n = self.config.count(kind);
        if n == 0 {
            return Ok(false);
        }
        let id = self.config.nth_of_kind(kind, self.rng.random_range(0..n)).expect("index in range");
        let delta = self.loops.delta_remove(&self.config, id)?;
        let a = death_acceptance(self.params().theta, delta, self.mass(kind), n);
        if self.rng.random::<f64>() < a {
            self.loops.remove(&mut self.config, id)?;
            self.tallies[mv.index()].accepted += 1;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// One proposal of a uniformly chosen move type.
    pub fn step(&mut self) -> Result<bool> {
        match MoveType::ALL[self.rng.random_range(0..4)] {
            MoveType::CrossBirth => self.propose_birth(Kind::Cross),
            MoveType::CrossDeath => self.propose_death(Kind::Cross),
            MoveType::BarBirth => self.propose_birth(Kind::DoubleBar),
            MoveType::BarDeath => self.propose_death(Kind::DoubleBar),
        }
    }

    pub fn run_steps(&mut self, n: u64) -> Result<()> {
        for _ in 0..n {
            self.step()?;
        }
        Ok(())
    }

    /// Loop lengths indexed by loop id, after checking that they add up to
    /// `β|Λ|`.
    pub fn checked_lengths(&self) -> Result<Vec<f64>> {
        let lengths = self.loops.lengths(&self.config);
        let total: f64 = lengths.iter().sum();
        let expect = self.config.beta() * self.config.vertex_count() as f64;
        if (total - expect).abs() > 1e-9 * expect {
            return Err(Error::Invariant {
                step: self.step_count,
                what: format!("loop lengths sum to {total}, expected {expect}"),
            });
        }
        Ok(lengths)
    }
}

fn kind_index(kind: Kind) -> usize {
    match kind {
        Kind::Cross => 0,
        Kind::DoubleBar => 1,
    }
}

/// What an observer sees at each measurement point.
pub struct Snapshot<'a> {
    pub state: &'a ChainState,
    /// Loop lengths indexed by loop id; free ids hold 0.
    pub lengths: &'a [f64],
    /// Zero-based index of this observation within the run.
    pub index: u64,
}

pub trait Observer {
    fn observe(&mut self, snap: &Snapshot<'_>) -> Result<()>;
}

impl<F: FnMut(&Snapshot<'_>) -> Result<()>> Observer for F {
    fn observe(&mut self, snap: &Snapshot<'_>) -> Result<()> {
        self(snap)
    }
}

/// A chain executing a [`RunPlan`]: burn-in, then measurement sweeps with an
/// observation every `thinning` sweeps.
#[derive(Clone, Debug)]
pub struct Chain {
    state: ChainState,
    plan: RunPlan,
    chain_index: u64,
    sweep_size: u64,
    sweeps_done: u64,
}

impl Chain {
    pub fn new(params: ModelParams, graph: Arc<Graph>, plan: RunPlan, chain_index: u64) -> Result<Self> {
        plan.validate()?;
        params.validate()?;
        let sweep_size = plan.resolved_sweep_size(&params, &graph);
        let state = ChainState::new(params, graph, sub_seed(plan.seed, chain_index))?;
        Ok(Self { state, plan, chain_index, sweep_size, sweeps_done: 0 })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn plan(&self) -> &RunPlan {
        &self.plan
    }

    pub fn chain_index(&self) -> u64 {
        self.chain_index
    }

    pub fn sweep_size(&self) -> u64 {
        self.sweep_size
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps_done
    }

    pub fn total_sweeps(&self) -> u64 {
        self.plan.burn_in_sweeps + self.plan.measure_sweeps
    }

    pub fn is_finished(&self) -> bool {
        self.sweeps_done >= self.total_sweeps()
    }

    /// Runs to completion.
    pub fn run<O: Observer + ?Sized>(&mut self, observer: &mut O) -> Result<()> {
        self.run_for(u64::MAX, observer)
    }

    /// Runs at most `sweeps` more sweeps.
    pub fn run_for<O: Observer + ?Sized>(&mut self, sweeps: u64, observer: &mut O) -> Result<()> {
        let end = self.total_sweeps().min(self.sweeps_done.saturating_add(sweeps));
        while self.sweeps_done < end {
            self.state.run_steps(self.sweep_size)?;
            self.sweeps_done += 1;
            if self.sweeps_done <= self.plan.burn_in_sweeps {
                continue;
            }
            let k = self.sweeps_done - self.plan.burn_in_sweeps;
            if k.is_multiple_of(self.plan.thinning) {
                let lengths = self.state.checked_lengths()?;
                let snap = Snapshot { state: &self.state, lengths: &lengths, index: k / self.plan.thinning - 1 };
                observer.observe(&snap)?;
            }
        }
        Ok(())
    }

    /// Serializable state; `observer` carries whatever the caller needs to
    /// resume its own accumulation.
    pub fn checkpoint(&self, observer: Option<serde_json::Value>) -> Checkpoint {
        Checkpoint {
            version: Checkpoint::VERSION,
            plan: self.plan,
            chain_index: self.chain_index,
            sweeps_done: self.sweeps_done,
            step_count: self.state.step_count,
            tallies: self.state.tallies,
            rng: self.state.rng.clone(),
            config: self.state.config.to_dump(),
            observer,
        }
    }

    pub fn resume(cp: &Checkpoint, graph: Option<Arc<Graph>>) -> Result<Self> {
        if cp.version != Checkpoint::VERSION {
            return Err(Error::InvalidParameter(format!("unsupported checkpoint version {}", cp.version)));
        }
        cp.plan.validate()?;
        let config = LoopConfig::from_dump(&cp.config, graph)?;
        let sweep_size = cp.plan.resolved_sweep_size(config.params(), config.graph());
        let mut state = ChainState::from_parts(config, cp.rng.clone());
        state.step_count = cp.step_count;
        state.tallies = cp.tallies;
        Ok(Self { state, plan: cp.plan, chain_index: cp.chain_index, sweep_size, sweeps_done: cp.sweeps_done })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub plan: RunPlan,
    pub chain_index: u64,
    pub sweeps_done: u64,
    pub step_count: u64,
    pub tallies: [Tally; 4],
    pub rng: ChaCha8Rng,
    pub config: ConfigDump,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<serde_json::Value>,
}

impl Checkpoint {
    pub const VERSION: u32 = 1;
}

/// Runs one chain to completion with a single observer.
pub fn run_chain<O: Observer + ?Sized>(
    params: ModelParams,
    graph: Arc<Graph>,
    plan: RunPlan,
    chain_index: u64,
    observer: &mut O,
) -> Result<Chain> {
    let mut chain = Chain::new(params, graph, plan, chain_index)?;
    chain.run(observer)?;
    Ok(chain)
}
