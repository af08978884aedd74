//! Estimators over chain samples.

mod accumulator;
mod spin;

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use accumulator::{Accumulator, Estimate, Key, Obs, Series};
pub use spin::{
    prefactor, spin_correlation, spin_identity, tau_alpha, CorrelationKind, IdentityValue, SpinIdentity, TauAlpha,
};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::loopconfig::{Dir, LoopConfig, LoopId, LoopSet};
use crate::mcmc::{Observer, Snapshot};

/// Normalized loop lengths `L/(β|Λ|)` in decreasing order.
pub fn partition_lengths(cfg: &LoopConfig, ls: &LoopSet) -> Vec<f64> {
    normalized_partition(&ls.lengths(cfg), cfg.beta() * cfg.vertex_count() as f64)
}

fn normalized_partition(lengths: &[f64], mass: f64) -> Vec<f64> {
    let mut p: Vec<f64> = lengths.iter().filter(|&&l| l > 0.0).map(|l| l / mass).collect();
    p.sort_by(|a, b| b.total_cmp(a));
    p
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSettings {
    /// Number of equally spaced times `jβ/n` at which κ is tabulated.
    pub time_points: usize,
    /// Measure κ(x, 0) for every displacement when `|Λ|` is at most this.
    pub full_lattice_cap: usize,
    /// Measure κ(x, t) for every displacement and time when `|Λ|` is at most this.
    pub all_times_cap: usize,
    pub record_partitions: bool,
    /// Partition entries below this are not stored.
    pub partition_floor: f64,
    pub partition_max: usize,
}

impl Default for MeasureSettings {
    fn default() -> Self {
        MeasureSettings {
            time_points: 8,
            full_lattice_cap: 4096,
            all_times_cap: 64,
            record_partitions: true,
            partition_floor: 1e-3,
            partition_max: 64,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ObserverState {
    acc: Accumulator,
    rng: ChaCha8Rng,
    partitions: Vec<Vec<f64>>,
}

/// Records κ, κ⁺, κ⁻ on a displacement/time grid plus loop-length scalars.
///
/// On periodic cubes every displacement is averaged over all base vertices.
/// On other graphs the base vertex is 0 and "displacements" are target vertices.
#[derive(Clone, Debug)]
pub struct LoopObserver {
    graph: Arc<Graph>,
    beta: f64,
    settings: MeasureSettings,
    times: Vec<f64>,
    /// Per time index, the displacements measured there.
    targets: Vec<Vec<usize>>,
    /// Per time index and target, slots for κ, κ⁺, κ⁻, κ⁺−κ⁻.
    slots: Vec<Vec<[usize; 4]>>,
    scalar_slots: Vec<(Obs, usize)>,
    state: ObserverState,
}

impl LoopObserver {
    pub fn new(graph: Arc<Graph>, beta: f64, settings: MeasureSettings, batch_size: u64, seed: u64) -> Result<Self> {
        if settings.time_points == 0 {
            return Err(Error::InvalidParameter("time_points must be at least 1".into()));
        }
        let n = graph.vertex_count();
        let times: Vec<f64> = (0..settings.time_points).map(|j| j as f64 * beta / settings.time_points as f64).collect();
        let axis = axis_targets(&graph);
        let mut targets = Vec::with_capacity(times.len());
        for j in 0..times.len() {
            let full = if j == 0 { n <= settings.full_lattice_cap } else { n <= settings.all_times_cap };
            targets.push(if full { (0..n).collect() } else { axis.clone() });
        }
        let mut acc = Accumulator::new(batch_size);
        let slots = targets
            .iter()
            .enumerate()
            .map(|(j, xs)| {
                xs.iter()
                    .map(|&x| {
                        [Obs::Kappa, Obs::KappaPlus, Obs::KappaMinus, Obs::KappaDiff]
                            .map(|obs| acc.slot(Key { obs, x: x as u32, t: j as u32 }))
                    })
                    .collect()
            })
            .collect();
        let scalar_slots = [
            Obs::KappaTilde,
            Obs::LoopLengthSum,
            Obs::MacroFraction,
            Obs::SumSquares,
            Obs::CrossCount,
            Obs::BarCount,
            Obs::TransitionCount,
            Obs::LoopCount,
        ]
        .into_iter()
        .map(|o| (o, acc.slot(Key::scalar(o))))
        .collect();
        Ok(LoopObserver {
            graph,
            beta,
            settings,
            times,
            targets,
            slots,
            scalar_slots,
            state: ObserverState { acc, rng: ChaCha8Rng::seed_from_u64(seed), partitions: Vec::new() },
        })
    }

    pub fn accumulator(&self) -> &Accumulator {
        &self.state.acc
    }

    pub fn partitions(&self) -> &[Vec<f64>] {
        &self.state.partitions
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    /// Pools another observer's results (same graph, grid and batch size).
    pub fn merge(&mut self, other: &LoopObserver) -> Result<()> {
        if other.times != self.times || other.targets != self.targets {
            return Err(Error::InvalidParameter("observers measure different grids".into()));
        }
        self.state.acc.merge(&other.state.acc)?;
        self.state.partitions.extend(other.state.partitions.iter().cloned());
        Ok(())
    }

    pub fn save_state(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(&self.state)?)
    }

    pub fn restore_state(&mut self, v: serde_json::Value) -> Result<()> {
        let st: ObserverState = serde_json::from_value(v)?;
        if st.acc.batch_size() != self.state.acc.batch_size() {
            return Err(Error::InvalidParameter("checkpoint batch size differs".into()));
        }
        self.state = st;
        Ok(())
    }

    fn scalar(&self, obs: Obs) -> usize {
        self.scalar_slots.iter().find(|(o, _)| *o == obs).expect("registered").1
    }

    pub fn table(&self) -> CorrelationTable {
        let acc = &self.state.acc;
        let mut entries = Vec::new();
        for (j, xs) in self.targets.iter().enumerate() {
            for &x in xs {
                let get = |obs| acc.estimate(&Key { obs, x: x as u32, t: j as u32 });
                if let (Some(kappa), Some(plus), Some(minus), Some(diff)) =
                    (get(Obs::Kappa), get(Obs::KappaPlus), get(Obs::KappaMinus), get(Obs::KappaDiff))
                {
                    entries.push(CorrelationEntry {
                        x,
                        coords: self.graph.coords(x),
                        t_index: j,
                        time: self.times[j],
                        kappa,
                        plus,
                        minus,
                        diff,
                    });
                }
            }
        }
        CorrelationTable {
            beta: self.beta,
            vertex_count: self.graph.vertex_count(),
            cube: self.graph.cube().map(|c| (c.side, c.dim)),
            entries,
        }
    }

    pub fn estimate(&self, obs: Obs) -> Option<Estimate> {
        self.state.acc.estimate(&Key::scalar(obs))
    }

    /// Mean of `L_{(x,0)}/(β|Λ|)` over `x`.
    pub fn macroscopic_fraction(&self) -> Option<Estimate> {
        self.estimate(Obs::MacroFraction)
    }
}

/// Displacements along each axis up to `L/2`, or the neighbours of 0.
fn axis_targets(g: &Graph) -> Vec<usize> {
    let mut out = vec![0];
    match g.cube() {
        Some(c) => {
            for axis in 0..c.dim {
                let mut coords = vec![0; c.dim];
                for r in 1..=c.side / 2 {
                    coords[axis] = r;
                    out.push(g.index_of(&coords).expect("in range"));
                }
            }
        }
        None => out.extend(g.neighbors(0).iter().map(|&(y, _)| y)),
    }
    out.sort_unstable();
    out.dedup();
    out
}

impl Observer for LoopObserver {
    fn observe(&mut self, snap: &Snapshot<'_>) -> Result<()> {
        let cfg = snap.state.config();
        let ls = snap.state.loops();
        let n = cfg.vertex_count();
        let mass = cfg.beta() * n as f64;
        let cube = self.graph.cube().is_some();
        let bases: Vec<usize> = if cube { (0..n).collect() } else { vec![0] };
        let label0 = labels_at(cfg, ls, 0.0)?;

        for (j, &t) in self.times.iter().enumerate() {
            let labels = if j == 0 { label0.clone() } else { labels_at(cfg, ls, t)? };
            for (k, &x) in self.targets[j].iter().enumerate() {
                let (mut plus, mut minus) = (0u32, 0u32);
                for &v in &bases {
                    let w = if cube { self.graph.translate(v, x).expect("cube") } else { x };
                    let (l0, d0) = label0[v];
                    let (l1, d1) = labels[w];
                    if l0 == l1 {
                        if d0 == d1 {
                            plus += 1;
                        } else {
                            minus += 1;
                        }
                    }
                }
                let nb = bases.len() as f64;
                let [sk, sp, sm, sd] = self.slots[j][k];
                let acc = &mut self.state.acc;
                acc.push(sk, f64::from(plus + minus) / nb);
                acc.push(sp, f64::from(plus) / nb);
                acc.push(sm, f64::from(minus) / nb);
                acc.push(sd, (f64::from(plus) - f64::from(minus)) / nb);
            }
        }

        // Σ_x ∫ 1[E_{v,x,t}] dt on a randomly shifted grid, averaged over v.
        let nt = self.times.len();
        let shift: f64 = self.state.rng.random();
        let mut hits = vec![0u32; snap.lengths.len()];
        for j in 0..nt {
            let t = (j as f64 + shift) * cfg.beta() / nt as f64;
            for w in 0..n {
                hits[ls.lookup(cfg, w, t)?.0 as usize] += 1;
            }
        }
        let tilde = label0.iter().map(|&(l, _)| f64::from(hits[l as usize])).sum::<f64>() * cfg.beta()
            / (nt as f64 * n as f64);

        let sum_l: f64 = label0.iter().map(|&(l, _)| snap.lengths[l as usize]).sum();
        // Summed in sorted order: loop ids, and so the order of `lengths`,
        // are not reproduced by a checkpoint restore.
        let partition = normalized_partition(snap.lengths, mass);
        let sum_sq: f64 = partition.iter().map(|p| p * p).sum();
        let values = [
            (Obs::KappaTilde, tilde),
            (Obs::LoopLengthSum, sum_l),
            (Obs::MacroFraction, sum_l / (mass * n as f64)),
            (Obs::SumSquares, sum_sq),
            (Obs::CrossCount, cfg.count(crate::loopconfig::Kind::Cross) as f64),
            (Obs::BarCount, cfg.count(crate::loopconfig::Kind::DoubleBar) as f64),
            (Obs::TransitionCount, cfg.total_count() as f64),
            (Obs::LoopCount, ls.loop_count() as f64),
        ];
        for (obs, v) in values {
            let s = self.scalar(obs);
            self.state.acc.push(s, v);
        }

        if self.settings.record_partitions {
            let mut p = partition;
            let keep = p.iter().take_while(|&&x| x >= self.settings.partition_floor).count();
            p.truncate(keep.min(self.settings.partition_max));
            self.state.partitions.push(p);
        }
        Ok(())
    }
}

fn labels_at(cfg: &LoopConfig, ls: &LoopSet, t: f64) -> Result<Vec<(LoopId, Dir)>> {
    (0..cfg.vertex_count()).map(|v| ls.lookup(cfg, v, t)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    /// Displacement as a vertex index (target vertex on non-cube graphs).
    pub x: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<usize>>,
    pub t_index: usize,
    pub time: f64,
    pub kappa: Estimate,
    pub plus: Estimate,
    pub minus: Estimate,
    pub diff: Estimate,
}

/// κ(x, t) estimates with standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub beta: f64,
    pub vertex_count: usize,
    /// `(L, d)` for periodic cubes.
    pub cube: Option<(usize, usize)>,
    pub entries: Vec<CorrelationEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierValue {
    pub re: f64,
    pub im: f64,
    /// Bound on the standard error of either part: `Σ_x |c_x| se(κ(x,0))`,
    /// which ignores correlations between displacements.
    pub stderr: f64,
}

impl CorrelationTable {
    pub fn get(&self, x: usize, t_index: usize) -> Option<&CorrelationEntry> {
        self.entries.iter().find(|e| e.x == x && e.t_index == t_index)
    }

    /// Whether κ(x, 0) is present for every displacement.
    pub fn has_full_lattice(&self) -> bool {
        self.entries.iter().filter(|e| e.t_index == 0).count() == self.vertex_count
    }

    /// `κ̂(k, 0) = Σ_x e^{−ik·x} κ(x, 0)` for `k` in the dual lattice.
    pub fn fourier(&self, k: &[f64]) -> Result<FourierValue> {
        let (side, dim) = self
            .cube
            .ok_or_else(|| Error::InvalidParameter("Fourier transforms need a periodic cube".into()))?;
        if k.len() != dim {
            return Err(Error::OffDualLattice(k.to_vec()));
        }
        let m: Vec<i64> = k
            .iter()
            .map(|&ki| {
                let r = ki * side as f64 / (2.0 * PI);
                if (r - r.round()).abs() > 1e-9 {
                    Err(Error::OffDualLattice(k.to_vec()))
                } else {
                    Ok((r.round() as i64).rem_euclid(side as i64))
                }
            })
            .collect::<Result<_>>()?;
        if !self.has_full_lattice() {
            return Err(Error::InvalidParameter("κ(x, 0) was not measured on the full lattice".into()));
        }
        let (mut re, mut im, mut se) = (0.0, 0.0, 0.0);
        for e in self.entries.iter().filter(|e| e.t_index == 0) {
            let coords = e.coords.as_ref().expect("cube entries carry coordinates");
            let phase: i64 = coords.iter().zip(&m).map(|(&c, &mi)| c as i64 * mi).sum();
            let angle = 2.0 * PI * (phase.rem_euclid(side as i64)) as f64 / side as f64;
            let (s, c) = angle.sin_cos();
            re += c * e.kappa.mean;
            im -= s * e.kappa.mean;
            se += c.abs().max(s.abs()) * e.kappa.stderr;
        }
        Ok(FourierValue { re, im, stderr: se })
    }

    /// Real part of [`CorrelationTable::fourier`], after checking that the
    /// imaginary part is within three standard errors of zero.
    pub fn fourier_kappa(&self, k: &[f64]) -> Result<f64> {
        let f = self.fourier(k)?;
        if f.im.abs() > 3.0 * f.stderr + 1e-12 {
            return Err(Error::Invariant {
                step: 0,
                what: format!("Im κ̂({k:?}) = {} exceeds 3σ = {}", f.im, 3.0 * f.stderr),
            });
        }
        Ok(f.re)
    }
}

pub fn fourier_kappa(table: &CorrelationTable, k: &[f64]) -> Result<f64> {
    table.fourier_kappa(k)
}
