//! Realizations ω of the cross / double-bar Poisson process and their loops.
//!
//! A vertical *strand* is a maximal time interval on one vertex that contains
//! no transition point. Strand ids are stable while the transitions bounding
//! them exist: the strand that starts at transition `id` on its endpoint
//! `side` has id `|Λ| + 2·id + side`, and a vertex without transitions is a
//! single strand (a column) with id `v`.

mod loopset;

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDescriptor};
pub use crate::model::{ModelParams, Spin};

pub use loopset::{classify_event, trace_loops, EventClass, LoopId, LoopSet, Strand};

pub type TransitionId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Cross,
    DoubleBar,
}

impl Kind {
    pub const ALL: [Kind; 2] = [Kind::Cross, Kind::DoubleBar];

    fn index(self) -> usize {
        match self {
            Kind::Cross => 0,
            Kind::DoubleBar => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub edge: usize,
    pub time: f64,
    pub kind: Kind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dir {
    Up,
    Down,
}

impl Dir {
    pub fn flip(self) -> Dir {
        match self {
            Dir::Up => Dir::Down,
            Dir::Down => Dir::Up,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StrandId(pub(crate) u32);

impl StrandId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrandKind {
    Column(usize),
    Above { id: TransitionId, side: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Event {
    time: f64,
    id: TransitionId,
}

/// A realization ω on a fixed graph with fixed model parameters.
///
/// Transitions live in a slab with stable ids. Each edge and each vertex keeps
/// its transitions sorted by time; the per-vertex lists are what loop tracing
/// reads. The per-kind id lists fix the order in which transitions are picked
/// for removal, and are reproduced exactly by a dump/restore cycle.
#[derive(Clone, Debug)]
pub struct LoopConfig {
    params: ModelParams,
    graph: Arc<Graph>,
    slots: Vec<Option<Transition>>,
    free: Vec<TransitionId>,
    per_edge: Vec<Vec<Event>>,
    per_vertex: Vec<Vec<Event>>,
    by_kind: [Vec<TransitionId>; 2],
    kind_pos: Vec<u32>,
}

impl LoopConfig {
    pub fn new(params: ModelParams, graph: Arc<Graph>) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            per_edge: vec![Vec::new(); graph.edge_count()],
            per_vertex: vec![Vec::new(); graph.vertex_count()],
            graph,
            slots: Vec::new(),
            free: Vec::new(),
            by_kind: [Vec::new(), Vec::new()],
            kind_pos: Vec::new(),
        })
    }

    pub fn from_transitions(
        params: ModelParams,
        graph: Arc<Graph>,
        transitions: &[Transition],
    ) -> Result<Self> {
        let mut cfg = Self::new(params, graph)?;
        for &tr in transitions {
            cfg.insert(tr)?;
        }
        Ok(cfg)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn total_count(&self) -> usize {
        self.by_kind[0].len() + self.by_kind[1].len()
    }

    pub fn count(&self, kind: Kind) -> usize {
        self.by_kind[kind.index()].len()
    }

    pub fn transition(&self, id: TransitionId) -> Result<&Transition> {
        self.slots
            .get(id as usize)
            .and_then(Option::as_ref)
            .ok_or(Error::InvalidTransitionId(id as usize))
    }

    /// The `i`-th transition of `kind`, in the order used for uniform picks.
    pub fn nth_of_kind(&self, kind: Kind, i: usize) -> Option<TransitionId> {
        self.by_kind[kind.index()].get(i).copied()
    }

    /// All transitions, crosses first, each kind in pick order.
    pub fn transitions(&self) -> impl Iterator<Item = (TransitionId, &Transition)> + '_ {
        self.by_kind
            .iter()
            .flatten()
            .map(move |&id| (id, self.slots[id as usize].as_ref().expect("listed id is live")))
    }

    /// Transitions on one edge as `(time, id)` in increasing time.
    pub fn edge_transitions(&self, edge: usize) -> impl Iterator<Item = (f64, TransitionId)> + '_ {
        self.per_edge[edge].iter().map(|e| (e.time, e.id))
    }

    /// Transitions touching vertex `v` as `(time, id)` in increasing time.
    pub fn vertex_transitions(&self, v: usize) -> impl Iterator<Item = (f64, TransitionId)> + '_ {
        self.per_vertex[v].iter().map(|e| (e.time, e.id))
    }

    pub fn vertex_degree(&self, v: usize) -> usize {
        self.per_vertex[v].len()
    }

    /// Whether `time` is a transition time of some edge at `v`.
    pub fn occupied(&self, v: usize, time: f64) -> bool {
        self.per_vertex[v]
            .binary_search_by(|e| e.time.total_cmp(&time))
            .is_ok()
    }

    /// Checks that `tr` could be inserted without breaking an invariant.
    pub fn check_insertable(&self, tr: &Transition) -> Result<()> {
        if tr.edge >= self.graph.edge_count() {
            return Err(Error::InvalidParameter(format!("edge {} out of range", tr.edge)));
        }
        if !(tr.time > 0.0 && tr.time < self.params.beta) {
            return Err(Error::InvalidParameter(format!(
                "transition time {} outside (0, {})",
                tr.time, self.params.beta
            )));
        }
        let (a, b) = self.graph.edge(tr.edge);
        for v in [a, b] {
            if self.occupied(v, tr.time) {
                return Err(Error::TimeCollision { vertex: v, time: tr.time });
            }
        }
        Ok(())
    }

    pub fn insert(&mut self, tr: Transition) -> Result<TransitionId> {
        self.check_insertable(&tr)?;
        let id = match self.free.pop() {
            Some(id) => {
                self.slots[id as usize] = Some(tr);
                id
            }
            None => {
                self.slots.push(Some(tr));
                self.kind_pos.push(0);
                (self.slots.len() - 1) as TransitionId
            }
        };
        let ev = Event { time: tr.time, id };
        let (a, b) = self.graph.edge(tr.edge);
        insert_sorted(&mut self.per_edge[tr.edge], ev);
        insert_sorted(&mut self.per_vertex[a], ev);
        insert_sorted(&mut self.per_vertex[b], ev);
        let kl = &mut self.by_kind[tr.kind.index()];
        self.kind_pos[id as usize] = kl.len() as u32;
        kl.push(id);
        Ok(id)
    }

    pub fn remove(&mut self, id: TransitionId) -> Result<Transition> {
        let tr = *self.transition(id)?;
        let (a, b) = self.graph.edge(tr.edge);
        remove_sorted(&mut self.per_edge[tr.edge], tr.time);
        remove_sorted(&mut self.per_vertex[a], tr.time);
        remove_sorted(&mut self.per_vertex[b], tr.time);
        let kl = &mut self.by_kind[tr.kind.index()];
        let pos = self.kind_pos[id as usize] as usize;
        kl.swap_remove(pos);
        if let Some(&moved) = kl.get(pos) {
            self.kind_pos[moved as usize] = pos as u32;
        }
        self.slots[id as usize] = None;
        self.free.push(id);
        Ok(tr)
    }

    // ---- strands ----

    /// Upper bound (exclusive) on strand indices for the current slab size.
    pub fn strand_capacity(&self) -> usize {
        self.vertex_count() + 2 * self.slots.len()
    }

    pub fn column(&self, v: usize) -> StrandId {
        StrandId(v as u32)
    }

    pub fn above(&self, id: TransitionId, side: usize) -> StrandId {
        StrandId((self.vertex_count() + 2 * id as usize + side) as u32)
    }

    pub fn strand_kind(&self, s: StrandId) -> StrandKind {
        let n = self.vertex_count();
        let i = s.index();
        if i < n {
            StrandKind::Column(i)
        } else {
            StrandKind::Above { id: ((i - n) / 2) as TransitionId, side: (i - n) % 2 }
        }
    }

    fn endpoint(&self, id: TransitionId, side: usize) -> usize {
        let (a, b) = self.graph.edge(self.slots[id as usize].expect("live transition").edge);
        if side == 0 {
            a
        } else {
            b
        }
    }

    fn side_at(&self, id: TransitionId, v: usize) -> usize {
        let (a, _) = self.graph.edge(self.slots[id as usize].expect("live transition").edge);
        usize::from(a != v)
    }

    pub fn strand_vertex(&self, s: StrandId) -> usize {
        match self.strand_kind(s) {
            StrandKind::Column(v) => v,
            StrandKind::Above { id, side } => self.endpoint(id, side),
        }
    }

    /// Whether `s` exists in the current configuration.
    pub fn strand_live(&self, s: StrandId) -> bool {
        match self.strand_kind(s) {
            StrandKind::Column(v) => self.per_vertex[v].is_empty(),
            StrandKind::Above { id, .. } => {
                matches!(self.slots.get(id as usize), Some(Some(_)))
            }
        }
    }

    fn position(&self, v: usize, id: TransitionId) -> usize {
        let t = self.slots[id as usize].expect("live transition").time;
        self.per_vertex[v]
            .binary_search_by(|e| e.time.total_cmp(&t))
            .expect("transition is indexed at its endpoints")
    }

    /// The strand containing the point `(v, t)`, for `t` in `[0, β)`.
    pub fn strand_at(&self, v: usize, t: f64) -> Result<StrandId> {
        let list = &self.per_vertex[v];
        if list.is_empty() {
            return Ok(self.column(v));
        }
        let idx = match list.binary_search_by(|e| e.time.total_cmp(&t)) {
            Ok(_) => return Err(Error::OnTransition { vertex: v, time: t }),
            Err(i) => i,
        };
        let ev = if idx == 0 { list[list.len() - 1] } else { list[idx - 1] };
        Ok(self.above(ev.id, self.side_at(ev.id, v)))
    }

    /// The transition (and side) at the upper end of `s`; none for a column.
    pub fn top_event(&self, s: StrandId) -> Option<(TransitionId, usize)> {
        match self.strand_kind(s) {
            StrandKind::Column(_) => None,
            StrandKind::Above { id, side } => {
                let v = self.endpoint(id, side);
                let list = &self.per_vertex[v];
                let next = list[(self.position(v, id) + 1) % list.len()].id;
                Some((next, self.side_at(next, v)))
            }
        }
    }

    /// The strand on `side` of transition `id` that ends at it.
    pub fn below(&self, id: TransitionId, side: usize) -> StrandId {
        let v = self.endpoint(id, side);
        let list = &self.per_vertex[v];
        let prev = list[(self.position(v, id) + list.len() - 1) % list.len()].id;
        self.above(prev, self.side_at(prev, v))
    }

    /// Start time and length of `s` on the β-periodic circle.
    pub fn strand_interval(&self, s: StrandId) -> (f64, f64) {
        let beta = self.params.beta;
        match self.strand_kind(s) {
            StrandKind::Column(_) => (0.0, beta),
            StrandKind::Above { id, side } => {
                let v = self.endpoint(id, side);
                let list = &self.per_vertex[v];
                let pos = self.position(v, id);
                let t0 = list[pos].time;
                if list.len() == 1 {
                    return (t0, beta);
                }
                if pos + 1 < list.len() {
                    (t0, list[pos + 1].time - t0)
                } else {
                    (t0, beta - t0 + list[0].time)
                }
            }
        }
    }

    /// Follows the loop from strand `s` traversed in direction `dir` to the
    /// next strand. A column closes on itself and returns `None`.
    pub fn step(&self, s: StrandId, dir: Dir) -> Option<(StrandId, Dir)> {
        let (id, side) = match dir {
            Dir::Up => self.top_event(s)?,
            Dir::Down => match self.strand_kind(s) {
                StrandKind::Column(_) => return None,
                StrandKind::Above { id, side } => (id, side),
            },
        };
        let other = 1 - side;
        let kind = self.slots[id as usize].expect("live transition").kind;
        Some(match (dir, kind) {
            (Dir::Up, Kind::Cross) => (self.above(id, other), Dir::Up),
            (Dir::Up, Kind::DoubleBar) => (self.below(id, other), Dir::Down),
            (Dir::Down, Kind::Cross) => (self.below(id, other), Dir::Down),
            (Dir::Down, Kind::DoubleBar) => (self.above(id, other), Dir::Up),
        })
    }

    /// Strands of `v` ordered by their lowest point: the strand through
    /// time 0 first, then the others by start time.
    pub fn vertex_strands(&self, v: usize) -> impl Iterator<Item = StrandId> + '_ {
        let list = &self.per_vertex[v];
        let (first, rest) = match list.split_last() {
            None => (self.column(v), &list[..0]),
            Some((last, rest)) => (self.above(last.id, self.side_at(last.id, v)), rest),
        };
        std::iter::once(first).chain(rest.iter().map(move |e| self.above(e.id, self.side_at(e.id, v))))
    }

    /// Every live strand, vertex by vertex in canonical order.
    pub fn strands(&self) -> impl Iterator<Item = StrandId> + '_ {
        (0..self.vertex_count()).flat_map(move |v| self.vertex_strands(v))
    }

    // ---- persistence ----

    pub fn to_dump(&self) -> ConfigDump {
        ConfigDump {
            version: ConfigDump::VERSION,
            params: self.params,
            graph: self.graph.descriptor(),
            transitions: self.transitions().map(|(_, tr)| *tr).collect(),
        }
    }

    /// Rebuilds a configuration; `graph` is reused when it matches the dump.
    pub fn from_dump(dump: &ConfigDump, graph: Option<Arc<Graph>>) -> Result<Self> {
        if dump.version != ConfigDump::VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported configuration dump version {}",
                dump.version
            )));
        }
        let graph = match graph {
            Some(g) if g.descriptor() == dump.graph => g,
            _ => Arc::new(Graph::from_descriptor(&dump.graph)?),
        };
        Self::from_transitions(dump.params, graph, &dump.transitions)
    }
}

fn insert_sorted(list: &mut Vec<Event>, ev: Event) {
    let pos = list.partition_point(|e| e.time < ev.time);
    list.insert(pos, ev);
}

fn remove_sorted(list: &mut Vec<Event>, time: f64) {
    let pos = list
        .binary_search_by(|e| e.time.total_cmp(&time))
        .expect("transition is indexed");
    list.remove(pos);
}

/// Versioned JSON form of a [`LoopConfig`]. Transitions are listed crosses
/// first, each kind in pick order, so a restore reproduces the chain state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigDump {
    pub version: u32,
    pub params: ModelParams,
    pub graph: GraphDescriptor,
    pub transitions: Vec<Transition>,
}

impl ConfigDump {
    pub const VERSION: u32 = 1;
}

/// Draws ω from ρ_u: per edge, Poisson(uβ) crosses and Poisson((1−u)β)
/// double bars at i.i.d. uniform times.
pub fn sample_poisson<R: Rng + ?Sized>(
    params: &ModelParams,
    graph: Arc<Graph>,
    rng: &mut R,
) -> Result<LoopConfig> {
    let mut cfg = LoopConfig::new(*params, graph)?;
    let beta = params.beta;
    let means = [(Kind::Cross, params.u * beta), (Kind::DoubleBar, (1.0 - params.u) * beta)];
    for edge in 0..cfg.graph.edge_count() {
        for (kind, mean) in means {
            let n = if mean > 0.0 {
                Poisson::new(mean)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?
                    .sample(rng) as u64
            } else {
                0
            };
            for _ in 0..n {
                loop {
                    let tr = Transition { edge, time: rng.random::<f64>() * beta, kind };
                    if cfg.check_insertable(&tr).is_ok() {
                        cfg.insert(tr)?;
                        break;
                    }
                }
            }
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn edge_graph() -> Arc<Graph> {
        Arc::new(Graph::from_edges(2, &[(0, 1)]).unwrap())
    }

    fn params(u: f64) -> ModelParams {
        ModelParams::new(1.0, u, 2.0).unwrap()
    }

    #[test]
    fn insert_remove_keeps_lists_sorted() {
        let g = Arc::new(Graph::periodic_cubic(3, 1).unwrap());
        let mut cfg = LoopConfig::new(params(0.5), g).unwrap();
        let a = cfg.insert(Transition { edge: 0, time: 0.5, kind: Kind::Cross }).unwrap();
        let b = cfg.insert(Transition { edge: 0, time: 0.2, kind: Kind::DoubleBar }).unwrap();
        cfg.insert(Transition { edge: 1, time: 0.7, kind: Kind::Cross }).unwrap();
        assert_eq!(cfg.total_count(), 3);
        assert_eq!(cfg.count(Kind::Cross), 2);
        let times: Vec<f64> = cfg.edge_transitions(0).map(|(t, _)| t).collect();
        assert_eq!(times, vec![0.2, 0.5]);
        cfg.remove(a).unwrap();
        assert_eq!(cfg.count(Kind::Cross), 1);
        assert!(cfg.transition(a).is_err());
        let reused = cfg.insert(Transition { edge: 2, time: 0.1, kind: Kind::Cross }).unwrap();
        assert_eq!(reused, a);
        assert_eq!(cfg.transition(b).unwrap().kind, Kind::DoubleBar);
    }

    #[test]
    fn rejects_collisions_and_bad_times() {
        let mut cfg = LoopConfig::new(params(1.0), edge_graph()).unwrap();
        cfg.insert(Transition { edge: 0, time: 0.3, kind: Kind::Cross }).unwrap();
        let dup = cfg.insert(Transition { edge: 0, time: 0.3, kind: Kind::DoubleBar });
        assert!(matches!(dup, Err(Error::TimeCollision { .. })));
        assert!(cfg.insert(Transition { edge: 0, time: 0.0, kind: Kind::Cross }).is_err());
        assert!(cfg.insert(Transition { edge: 0, time: 1.0, kind: Kind::Cross }).is_err());
        assert!(cfg.insert(Transition { edge: 3, time: 0.5, kind: Kind::Cross }).is_err());
    }

    #[test]
    fn strand_lookup_wraps_around() {
        let mut cfg = LoopConfig::new(params(1.0), edge_graph()).unwrap();
        assert_eq!(cfg.strand_at(0, 0.4).unwrap(), cfg.column(0));
        let a = cfg.insert(Transition { edge: 0, time: 0.25, kind: Kind::Cross }).unwrap();
        let b = cfg.insert(Transition { edge: 0, time: 0.75, kind: Kind::Cross }).unwrap();
        assert_eq!(cfg.strand_at(0, 0.0).unwrap(), cfg.above(b, 0));
        assert_eq!(cfg.strand_at(1, 0.5).unwrap(), cfg.above(a, 1));
        assert_eq!(cfg.strand_at(1, 0.9).unwrap(), cfg.above(b, 1));
        assert!(matches!(cfg.strand_at(0, 0.25), Err(Error::OnTransition { .. })));
        assert_eq!(cfg.strand_interval(cfg.above(b, 0)), (0.75, 0.5));
        assert_eq!(cfg.top_event(cfg.above(a, 0)), Some((b, 0)));
        assert_eq!(cfg.below(a, 1), cfg.above(b, 1));
        let order: Vec<_> = cfg.vertex_strands(0).collect();
        assert_eq!(order, vec![cfg.above(b, 0), cfg.above(a, 0)]);
    }

    #[test]
    fn sampling_respects_intensities() {
        let g = Arc::new(Graph::periodic_cubic(4, 2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = sample_poisson(&params(1.0), g.clone(), &mut rng).unwrap();
        assert_eq!(cfg.count(Kind::DoubleBar), 0);
        let cfg = sample_poisson(&params(0.0), g, &mut rng).unwrap();
        assert_eq!(cfg.count(Kind::Cross), 0);
    }

    #[test]
    fn dump_round_trip() {
        let g = Arc::new(Graph::periodic_cubic(3, 2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = ModelParams::new(2.0, 0.4, 3.0).unwrap();
        let cfg = sample_poisson(&p, g, &mut rng).unwrap();
        let json = serde_json::to_string(&cfg.to_dump()).unwrap();
        let dump: ConfigDump = serde_json::from_str(&json).unwrap();
        let back = LoopConfig::from_dump(&dump, None).unwrap();
        assert_eq!(back.to_dump(), cfg.to_dump());
        for kind in Kind::ALL {
            for i in 0..cfg.count(kind) {
                let a = cfg.transition(cfg.nth_of_kind(kind, i).unwrap()).unwrap();
                let b = back.transition(back.nth_of_kind(kind, i).unwrap()).unwrap();
                assert_eq!(a, b);
            }
        }
    }
}
