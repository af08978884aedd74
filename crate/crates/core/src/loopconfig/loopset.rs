use super::{Dir, Kind, LoopConfig, StrandId, Transition, TransitionId};
use crate::error::{Error, Result};

/// Names a loop in the current state of a [`LoopSet`]. Ids are only
/// meaningful until the set is next modified.
pub type LoopId = u32;

const NIL: u32 = u32::MAX;

/// How `(x, 0)` and `(y, t)` relate: different loops, or the same loop with
/// equal (`Plus`) or opposite (`Minus`) vertical direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventClass {
    None,
    Plus,
    Minus,
}

impl EventClass {
    pub fn same_loop(self) -> bool {
        self != EventClass::None
    }
}

/// A strand as seen from a traced loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Strand {
    pub vertex: usize,
    pub start: f64,
    pub length: f64,
    pub dir: Dir,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum End {
    Bottom,
    Top,
}

type Half = (StrandId, End);

#[derive(Clone, Copy, Debug)]
struct Node {
    left: u32,
    right: u32,
    parent: u32,
    prio: u64,
    size: u32,
    /// Reversal of the whole subtree still to be applied to `left`, `right`
    /// and `dir`.
    rev: bool,
    dir: Dir,
    live: bool,
}

const DEAD: Node = Node { left: NIL, right: NIL, parent: NIL, prio: 0, size: 0, rev: false, dir: Dir::Up, live: false };

/// Loop decomposition of a [`LoopConfig`].
///
/// Each loop is stored as the cyclic sequence of its strands, cut at an
/// arbitrary point, in an implicit treap keyed by position. A node carries the
/// strand's direction along the loop's orientation; reversing a subtree flips
/// order and directions lazily. Inserting or removing a transition subdivides
/// or joins strands and then reconnects two junctions, which costs a bounded
/// number of splits and joins, so updates take expected `O(log n)` time
/// whatever the loop sizes. The id of a loop is the strand at its treap root.
#[derive(Clone, Debug, Default)]
pub struct LoopSet {
    nodes: Vec<Node>,
    count: usize,
    prio_state: u64,
}

pub fn trace_loops(cfg: &LoopConfig) -> LoopSet {
    LoopSet::trace(cfg)
}

/// Classifies the pair `(x, 0)`, `(y, t)`.
pub fn classify_event(cfg: &LoopConfig, ls: &LoopSet, x: usize, y: usize, t: f64) -> Result<EventClass> {
    if !(0.0..cfg.beta()).contains(&t) {
        return Err(Error::InvalidParameter(format!("time {t} outside [0, {})", cfg.beta())));
    }
    let (l0, d0) = ls.lookup(cfg, x, 0.0)?;
    let (l1, d1) = ls.lookup(cfg, y, t)?;
    Ok(if l0 != l1 {
        EventClass::None
    } else if d0 == d1 {
        EventClass::Plus
    } else {
        EventClass::Minus
    })
}

impl LoopSet {
    /// Full trace, each loop starting at its lowest `(vertex, start)` strand
    /// and oriented so that this strand points up.
    pub fn trace(cfg: &LoopConfig) -> Self {
        let mut ls = LoopSet::default();
        ls.fit(cfg);
        for v in 0..cfg.vertex_count() {
            for s in cfg.vertex_strands(v) {
                if ls.nodes[s.index()].live {
                    continue;
                }
                let mut root = NIL;
                let mut cur = (s, Dir::Up);
                loop {
                    ls.make(cur.0 .0, cur.1);
                    root = ls.join(root, cur.0 .0);
                    match cfg.step(cur.0, cur.1) {
                        Some(next) if next.0 != s => cur = next,
                        _ => break,
                    }
                }
                ls.count += 1;
            }
        }
        ls
    }

    pub fn loop_count(&self) -> usize {
        self.count
    }

    pub fn loop_ids(&self) -> impl Iterator<Item = LoopId> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.live && n.parent == NIL).map(|(i, _)| i as LoopId)
    }

    /// Number of strands in loop `id`.
    pub fn strand_count(&self, id: LoopId) -> Result<usize> {
        match self.nodes.get(id as usize) {
            Some(n) if n.live && n.parent == NIL => Ok(n.size as usize),
            _ => Err(Error::InvalidLoopId(id as usize)),
        }
    }

    /// Loop and direction of a live strand.
    pub fn strand(&self, s: StrandId) -> (LoopId, Dir) {
        let mut x = s.0;
        let mut flip = false;
        loop {
            let n = &self.nodes[x as usize];
            flip ^= n.rev;
            if n.parent == NIL {
                break;
            }
            x = n.parent;
        }
        let d = self.nodes[s.index()].dir;
        (x, if flip { d.flip() } else { d })
    }

    /// Loop id and direction at the point `(v, t)`.
    pub fn lookup(&self, cfg: &LoopConfig, v: usize, t: f64) -> Result<(LoopId, Dir)> {
        Ok(self.strand(cfg.strand_at(v, t)?))
    }

    /// Loop lengths indexed by loop id (other ids hold 0). Strands are summed
    /// in vertex/time order, so the result does not depend on the tree shape.
    pub fn lengths(&self, cfg: &LoopConfig) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        for s in cfg.strands() {
            out[self.strand(s).0 as usize] += cfg.strand_interval(s).1;
        }
        out
    }

    pub fn loop_length(&self, cfg: &LoopConfig, id: LoopId) -> Result<f64> {
        self.strand_count(id)?;
        Ok(cfg.strands().filter(|&s| self.strand(s).0 == id).map(|s| cfg.strand_interval(s).1).sum())
    }

    /// Loops as cyclic strand sequences, in order of their lowest strand,
    /// each starting there and following the stored orientation.
    pub fn loops(&self, cfg: &LoopConfig) -> Vec<Vec<Strand>> {
        let mut seen = vec![false; self.nodes.len()];
        let mut out = Vec::with_capacity(self.count);
        for s in cfg.strands() {
            let (id, d) = self.strand(s);
            if std::mem::replace(&mut seen[id as usize], true) {
                continue;
            }
            let mut seq = Vec::new();
            let mut cur = (s, d);
            loop {
                let (start, length) = cfg.strand_interval(cur.0);
                seq.push(Strand { vertex: cfg.strand_vertex(cur.0), start, length, dir: cur.1 });
                match cfg.step(cur.0, cur.1) {
                    Some(next) if next.0 != s => cur = next,
                    _ => break,
                }
            }
            out.push(seq);
        }
        out
    }

    /// Per strand in canonical order: the index of its loop by first
    /// appearance and whether its direction agrees with that loop's first
    /// strand. Two sets describe the same loops iff their forms are equal.
    pub fn canonical_form(&self, cfg: &LoopConfig) -> Vec<(u32, bool)> {
        let mut map: Vec<Option<(u32, Dir)>> = vec![None; self.nodes.len()];
        let mut next = 0;
        cfg.strands()
            .map(|s| {
                let (id, d) = self.strand(s);
                let (canon, first) = *map[id as usize].get_or_insert_with(|| {
                    next += 1;
                    (next - 1, d)
                });
                (canon, d == first)
            })
            .collect()
    }

    /// Verifies the trees and checks every sequence against the configuration.
    pub fn check(&self, cfg: &LoopConfig) -> std::result::Result<(), String> {
        let strands: Vec<StrandId> = cfg.strands().collect();
        let live = self.nodes.iter().filter(|n| n.live).count();
        if live != strands.len() {
            return Err(format!("{live} live nodes for {} strands", strands.len()));
        }
        for (i, n) in self.nodes.iter().enumerate().filter(|(_, n)| n.live) {
            for c in [n.left, n.right] {
                if c != NIL {
                    let ch = &self.nodes[c as usize];
                    if !ch.live || ch.parent != i as u32 {
                        return Err(format!("node {i}: child {c} is not linked back"));
                    }
                    if ch.prio > n.prio {
                        return Err(format!("node {i}: heap order violated at child {c}"));
                    }
                }
            }
            if n.size != 1 + self.size(n.left) + self.size(n.right) {
                return Err(format!("node {i}: size out of date"));
            }
        }
        let roots: Vec<u32> = self.loop_ids().collect();
        if roots.len() != self.count {
            return Err(format!("{} roots but count {}", roots.len(), self.count));
        }
        for r in roots {
            let mut seq = Vec::new();
            self.in_order(r, false, &mut seq);
            for (k, &(s, d)) in seq.iter().enumerate() {
                let s = StrandId(s);
                if !cfg.strand_live(s) {
                    return Err(format!("strand {s:?} is not in the configuration"));
                }
                let (nx, nd) = seq[(k + 1) % seq.len()];
                match cfg.step(s, d) {
                    None if seq.len() == 1 => {}
                    Some((t, e)) if t.0 == nx && e == nd => {}
                    other => {
                        return Err(format!("strand {s:?} continues into {other:?}, stored ({nx}, {nd:?})"));
                    }
                }
            }
        }
        Ok(())
    }

    fn in_order(&self, x: u32, flip: bool, out: &mut Vec<(u32, Dir)>) {
        if x == NIL {
            return;
        }
        let n = &self.nodes[x as usize];
        let flip = flip ^ n.rev;
        let (first, second) = if flip { (n.right, n.left) } else { (n.left, n.right) };
        self.in_order(first, flip, out);
        out.push((x, if flip { n.dir.flip() } else { n.dir }));
        self.in_order(second, flip, out);
    }

    /// Change in |ℒ| if `tr` were inserted.
    pub fn delta_insert(&self, cfg: &LoopConfig, tr: &Transition) -> Result<i32> {
        cfg.check_insertable(tr)?;
        let (a, b) = cfg.graph().edge(tr.edge);
        let (la, da) = self.lookup(cfg, a, tr.time)?;
        let (lb, db) = self.lookup(cfg, b, tr.time)?;
        Ok(if la != lb {
            -1
        } else if (da == db) == (tr.kind == Kind::Cross) {
            1
        } else {
            0
        })
    }

    /// Change in |ℒ| if transition `id` were removed.
    pub fn delta_remove(&self, cfg: &LoopConfig, id: TransitionId) -> Result<i32> {
        cfg.transition(id)?;
        let (l1, d1) = self.strand(cfg.below(id, 0));
        let (l2, d2) = self.strand(cfg.above(id, 0));
        Ok(if l1 != l2 {
            -1
        } else if d1 == d2 {
            1
        } else {
            0
        })
    }

    /// Inserts `tr` into `cfg` and repairs the loops. Returns the new id and
    /// the change in loop count.
    pub fn insert(&mut self, cfg: &mut LoopConfig, tr: Transition) -> Result<(TransitionId, i32)> {
        let delta = self.delta_insert(cfg, &tr)?;
        let (a, b) = cfg.graph().edge(tr.edge);
        let old = [cfg.strand_at(a, tr.time)?, cfg.strand_at(b, tr.time)?];
        let column = [cfg.vertex_degree(a) == 0, cfg.vertex_degree(b) == 0];
        let id = cfg.insert(tr)?;
        self.fit(cfg);
        // Subdivide the two strands, which leaves each loop passing straight
        // through the new time.
        for side in 0..2 {
            let up = cfg.above(id, side);
            if column[side] {
                self.relabel(old[side].0, up.0);
            } else {
                let (_, d) = self.strand(old[side]);
                self.insert_beside(old[side].0, up.0, d);
            }
        }
        let (al, au) = (cfg.below(id, 0), cfg.above(id, 0));
        let (bl, bu) = (cfg.below(id, 1), cfg.above(id, 1));
        let halves = [(al, End::Top), (au, End::Bottom), (bl, End::Top), (bu, End::Bottom)];
        let partner = match tr.kind {
            Kind::Cross => 3,
            Kind::DoubleBar => 2,
        };
        let got = self.reconnect(halves, partner);
        debug_assert_eq!(got, delta);
        Ok((id, delta))
    }

    /// Removes transition `id` from `cfg` and repairs the loops. Returns the
    /// transition and the change in loop count.
    pub fn remove(&mut self, cfg: &mut LoopConfig, id: TransitionId) -> Result<(Transition, i32)> {
        let delta = self.delta_remove(cfg, id)?;
        let tr = *cfg.transition(id)?;
        let (a, b) = cfg.graph().edge(tr.edge);
        let (al, au) = (cfg.below(id, 0), cfg.above(id, 0));
        let (bl, bu) = (cfg.below(id, 1), cfg.above(id, 1));
        let single = [cfg.vertex_degree(a) == 1, cfg.vertex_degree(b) == 1];
        let halves = match tr.kind {
            Kind::Cross => [(al, End::Top), (bu, End::Bottom), (bl, End::Top), (au, End::Bottom)],
            Kind::DoubleBar => [(al, End::Top), (bl, End::Top), (au, End::Bottom), (bu, End::Bottom)],
        };
        let partner = match tr.kind {
            Kind::Cross => 3,
            Kind::DoubleBar => 2,
        };
        let got = self.reconnect(halves, partner);
        debug_assert_eq!(got, delta);
        cfg.remove(id)?;
        // Each loop now runs straight through the old time; merge the strands.
        for (side, v, up) in [(0, a, au), (1, b, bu)] {
            if single[side] {
                self.relabel(up.0, cfg.column(v).0);
            } else {
                self.delete(up.0);
            }
        }
        Ok((tr, delta))
    }

    /// Re-pairs four half-strands. On entry `h[0]`–`h[1]` and `h[2]`–`h[3]`
    /// are consecutive along their loops; on exit `h[0]` is joined to
    /// `h[partner]` and the remaining two to each other. Returns the change in
    /// loop count.
    fn reconnect(&mut self, h: [Half; 4], partner: usize) -> i32 {
        let mut pair = [0usize; 4];
        pair[0] = partner;
        pair[partner] = 0;
        let rest: Vec<usize> = (1..4).filter(|&i| i != partner).collect();
        pair[rest[0]] = rest[1];
        pair[rest[1]] = rest[0];

        // `l` is left by the loop at the junction, `r` entered.
        let (l1, r1) = if self.exits(h[0]) { (0, 1) } else { (1, 0) };
        let (l2, r2) = if self.exits(h[2]) { (2, 3) } else { (3, 2) };
        let root1 = self.strand(h[l1].0).0;
        let root2 = self.strand(h[l2].0).0;
        if root1 != root2 {
            let a = self.rotate(h[r1].0 .0);
            let b = self.rotate(h[r2].0 .0);
            if pair[l1] != r2 {
                self.nodes[b as usize].rev ^= true;
            }
            self.join(a, b);
            self.count -= 1;
            -1
        } else {
            let s = self.rotate(h[r1].0 .0);
            let (_, j) = self.index(h[r2].0 .0);
            let (p, q) = self.split_root(s, j);
            if pair[l1] == r2 {
                self.count += 1;
                1
            } else {
                self.nodes[q as usize].rev ^= true;
                self.join(p, q);
                0
            }
        }
    }

    /// Whether the loop leaves the strand through this end.
    fn exits(&self, (s, end): Half) -> bool {
        let d = self.strand(s).1;
        (d == Dir::Up) == (end == End::Top)
    }

    // ---- treap primitives ----

    fn fit(&mut self, cfg: &LoopConfig) {
        let cap = cfg.strand_capacity();
        if self.nodes.len() < cap {
            self.nodes.resize(cap, DEAD);
        }
    }

    fn next_prio(&mut self) -> u64 {
        self.prio_state = self.prio_state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.prio_state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn make(&mut self, x: u32, dir: Dir) {
        let prio = self.next_prio();
        self.nodes[x as usize] = Node { prio, size: 1, dir, live: true, ..DEAD };
    }

    fn size(&self, x: u32) -> u32 {
        if x == NIL {
            0
        } else {
            self.nodes[x as usize].size
        }
    }

    fn pull(&mut self, x: u32) {
        let n = self.nodes[x as usize];
        self.nodes[x as usize].size = 1 + self.size(n.left) + self.size(n.right);
    }

    fn push(&mut self, x: u32) {
        let n = &mut self.nodes[x as usize];
        if !n.rev {
            return;
        }
        n.rev = false;
        std::mem::swap(&mut n.left, &mut n.right);
        n.dir = n.dir.flip();
        let (l, r) = (n.left, n.right);
        for c in [l, r] {
            if c != NIL {
                self.nodes[c as usize].rev ^= true;
            }
        }
    }

    fn set_left(&mut self, x: u32, c: u32) {
        self.nodes[x as usize].left = c;
        if c != NIL {
            self.nodes[c as usize].parent = x;
        }
    }

    fn set_right(&mut self, x: u32, c: u32) {
        self.nodes[x as usize].right = c;
        if c != NIL {
            self.nodes[c as usize].parent = x;
        }
    }

    fn merge(&mut self, a: u32, b: u32) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        if self.nodes[a as usize].prio > self.nodes[b as usize].prio {
            self.push(a);
            let r = self.merge(self.nodes[a as usize].right, b);
            self.set_right(a, r);
            self.pull(a);
            a
        } else {
            self.push(b);
            let l = self.merge(a, self.nodes[b as usize].left);
            self.set_left(b, l);
            self.pull(b);
            b
        }
    }

    fn split(&mut self, t: u32, k: u32) -> (u32, u32) {
        if t == NIL {
            return (NIL, NIL);
        }
        self.push(t);
        let left = self.nodes[t as usize].left;
        let ls = self.size(left);
        if k <= ls {
            let (a, b) = self.split(left, k);
            self.set_left(t, b);
            self.pull(t);
            (a, t)
        } else {
            let (a, b) = self.split(self.nodes[t as usize].right, k - ls - 1);
            self.set_right(t, a);
            self.pull(t);
            (t, b)
        }
    }

    /// Concatenates two sequences and returns the root.
    fn join(&mut self, a: u32, b: u32) -> u32 {
        let r = self.merge(a, b);
        if r != NIL {
            self.nodes[r as usize].parent = NIL;
        }
        r
    }

    /// First `k` elements and the rest, as separate roots.
    fn split_root(&mut self, t: u32, k: u32) -> (u32, u32) {
        let (a, b) = self.split(t, k);
        for x in [a, b] {
            if x != NIL {
                self.nodes[x as usize].parent = NIL;
            }
        }
        (a, b)
    }

    /// Root of `x` and its position, after settling pending reversals on the
    /// path.
    fn index(&mut self, x: u32) -> (u32, u32) {
        let mut path = vec![x];
        let mut y = x;
        while self.nodes[y as usize].parent != NIL {
            y = self.nodes[y as usize].parent;
            path.push(y);
        }
        for &z in path.iter().rev() {
            self.push(z);
        }
        let mut idx = self.size(self.nodes[x as usize].left);
        let mut c = x;
        for &p in &path[1..] {
            if self.nodes[p as usize].right == c {
                idx += self.size(self.nodes[p as usize].left) + 1;
            }
            c = p;
        }
        (y, idx)
    }

    /// Rotates the cyclic sequence containing `x` to start at `x`.
    fn rotate(&mut self, x: u32) -> u32 {
        let (root, i) = self.index(x);
        let (a, b) = self.split_root(root, i);
        self.join(b, a)
    }

    /// Puts the new node `y` next to `x`, after it when `dir` is up.
    fn insert_beside(&mut self, x: u32, y: u32, dir: Dir) {
        let (root, i) = self.index(x);
        let at = if dir == Dir::Up { i + 1 } else { i };
        let (a, b) = self.split_root(root, at);
        self.make(y, dir);
        let ay = self.join(a, y);
        self.join(ay, b);
    }

    fn delete(&mut self, x: u32) {
        let (root, i) = self.index(x);
        let (a, b) = self.split_root(root, i);
        let (m, c) = self.split_root(b, 1);
        debug_assert_eq!(m, x);
        self.join(a, c);
        self.nodes[x as usize] = DEAD;
    }

    /// Moves node `from` to index `to`, keeping its place in the tree.
    fn relabel(&mut self, from: u32, to: u32) {
        if from == to {
            return;
        }
        let n = self.nodes[from as usize];
        self.nodes[to as usize] = n;
        self.nodes[from as usize] = DEAD;
        if n.parent != NIL {
            let p = &mut self.nodes[n.parent as usize];
            if p.left == from {
                p.left = to;
            } else {
                p.right = to;
            }
        }
        for c in [n.left, n.right] {
            if c != NIL {
                self.nodes[c as usize].parent = to;
            }
        }
    }
}
