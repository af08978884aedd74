//! Finite simple graphs and periodic cubic boxes.
//!
//! Vertices are dense indices `0..n`. For a periodic cube of side `L` in
//! dimension `d` the vertex with coordinates `(x_1, .., x_d)` has index
//! `x_1 + L x_2 + L^2 x_3 + ...` (axis 1 fastest).

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeMeta {
    pub side: usize,
    pub dim: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

/// Serializable description sufficient to rebuild a graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GraphDescriptor {
    PeriodicCube { side: usize, dim: usize },
    EdgeList { vertex_count: usize, edges: Vec<(usize, usize)> },
}

#[derive(Clone, Debug)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    /// (neighbor, edge index) pairs.
    adjacency: Vec<Vec<(usize, usize)>>,
    cube: Option<CubeMeta>,
}

impl Graph {
    /// Builds a graph from an explicit edge list. Edges are stored with the
    /// smaller endpoint first, in input order.
    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut stored = Vec::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); vertex_count];
        for &(a, b) in edges {
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a vertex outside 0..{vertex_count}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            let idx = stored.len();
            stored.push(e);
            adjacency[e.0].push((e.1, idx));
            adjacency[e.1].push((e.0, idx));
        }
        Ok(Self { vertex_count, edges: stored, adjacency, cube: None })
    }

    /// The box `(Z/LZ)^d` with nearest-neighbour edges. For `L = 2` the two
    /// neighbours along an axis coincide and the double edge collapses to a
    /// single one, so the graph is not `2d`-regular.
    pub fn periodic_cubic(side: usize, dim: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidParameter(format!("side length must be >= 2, got {side}")));
        }
        if dim < 1 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        let n = side
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::InvalidParameter("box too large".into()))?;
        let meta = CubeMeta { side, dim };
        let mut seen = HashSet::new();
        let mut edges = Vec::with_capacity(n * dim);
        for v in 0..n {
            for axis in 0..dim {
                let w = cube_shift(meta, v, axis, 1);
                let e = (v.min(w), v.max(w));
                if seen.insert(e) {
                    edges.push(e);
                }
            }
        }
        let mut g = Self::from_edges(n, &edges)?;
        g.cube = Some(meta);
        Ok(g)
    }

    pub fn from_descriptor(desc: &GraphDescriptor) -> Result<Self> {
        match desc {
            GraphDescriptor::PeriodicCube { side, dim } => Self::periodic_cubic(*side, *dim),
            GraphDescriptor::EdgeList { vertex_count, edges } => Self::from_edges(*vertex_count, edges),
        }
    }

    pub fn descriptor(&self) -> GraphDescriptor {
        match self.cube {
            Some(CubeMeta { side, dim }) => GraphDescriptor::PeriodicCube { side, dim },
            None => GraphDescriptor::EdgeList { vertex_count: self.vertex_count, edges: self.edges.clone() },
        }
    }

    /// Parses the adjacency text format: one edge `i j` per line, `#`
    /// comments and blank lines ignored. The vertex count is one more than
    /// the largest index unless a `vertices N` line says otherwise.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut declared = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::InvalidGraph(format!("line {}: expected `i j`, got {raw:?}", lineno + 1));
            if fields.len() == 2 && fields[0] == "vertices" {
                declared = Some(fields[1].parse::<usize>().map_err(|_| bad())?);
                continue;
            }
            if fields.len() != 2 {
                return Err(bad());
            }
            let a = fields[0].parse::<usize>().map_err(|_| bad())?;
            let b = fields[1].parse::<usize>().map_err(|_| bad())?;
            edges.push((a, b));
        }
        let implied = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
        Self::from_edges(declared.unwrap_or(implied), &edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> (usize, usize) {
        self.edges[idx]
    }

    /// `(neighbor, edge index)` pairs of `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn edge_between(&self, x: usize, y: usize) -> Option<usize> {
        self.adjacency.get(x)?.iter().find(|&&(w, _)| w == y).map(|&(_, e)| e)
    }

    pub fn cube(&self) -> Option<CubeMeta> {
        self.cube
    }

    pub fn coords(&self, v: usize) -> Option<Vec<usize>> {
        let meta = self.cube?;
        let mut rest = v;
        Some(
            (0..meta.dim)
                .map(|_| {
                    let c = rest % meta.side;
                    rest /= meta.side;
                    c
                })
                .collect(),
        )
    }

    pub fn index_of(&self, coords: &[usize]) -> Option<usize> {
        let meta = self.cube?;
        if coords.len() != meta.dim {
            return None;
        }
        Some(coords.iter().rev().fold(0, |acc, &c| acc * meta.side + c % meta.side))
    }

    /// `v + x` on the torus, where `x` is itself a vertex index read as a
    /// displacement.
    pub fn translate(&self, v: usize, x: usize) -> Option<usize> {
        let meta = self.cube?;
        let (mut a, mut b) = (v, x);
        let mut out = 0;
        let mut scale = 1;
        for _ in 0..meta.dim {
            out += ((a % meta.side + b % meta.side) % meta.side) * scale;
            a /= meta.side;
            b /= meta.side;
            scale *= meta.side;
        }
        Some(out)
    }

    /// The displacement `-x`.
    pub fn negate(&self, x: usize) -> Option<usize> {
        let coords = self.coords(x)?;
        let side = self.cube?.side;
        let neg: Vec<usize> = coords.iter().map(|&c| (side - c) % side).collect();
        self.index_of(&neg)
    }

    /// Unit displacement along `axis` (0-based).
    pub fn unit(&self, axis: usize) -> Option<usize> {
        let meta = self.cube?;
        (axis < meta.dim).then(|| meta.side.pow(axis as u32) % self.vertex_count.max(1))
    }

    /// Two-coloring with every edge bichromatic, if one exists. The lowest
    /// vertex of each connected component is colored `A`.
    pub fn bipartition(&self) -> Option<Vec<Sublattice>> {
        let mut color: Vec<Option<Sublattice>> = vec![None; self.vertex_count];
        let mut queue = VecDeque::new();
        for root in 0..self.vertex_count {
            if color[root].is_some() {
                continue;
            }
            color[root] = Some(Sublattice::A);
            queue.push_back(root);
            while let Some(v) = queue.pop_front() {
                let other = match color[v] {
                    Some(Sublattice::A) => Sublattice::B,
                    _ => Sublattice::A,
                };
                for &(w, _) in &self.adjacency[v] {
                    match color[w] {
                        None => {
                            color[w] = Some(other);
                            queue.push_back(w);
                        }
                        Some(c) if c != other => return None,
                        Some(_) => {}
                    }
                }
            }
        }
        color.into_iter().collect()
    }

    /// Breadth-first shortest-path length.
    pub fn distance(&self, x: usize, y: usize) -> Result<usize> {
        let n = self.vertex_count;
        if x >= n || y >= n {
            return Err(Error::InvalidParameter(format!("vertex out of range 0..{n}")));
        }
        self.distances_from(x)[y].ok_or(Error::Disconnected(x, y))
    }

    pub fn distances_from(&self, x: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.vertex_count];
        let mut queue = VecDeque::from([x]);
        dist[x] = Some(0);
        while let Some(v) = queue.pop_front() {
            let dv = dist[v].unwrap_or(0);
            for &(w, _) in &self.adjacency[v] {
                if dist[w].is_none() {
                    dist[w] = Some(dv + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

fn cube_shift(meta: CubeMeta, v: usize, axis: usize, step: usize) -> usize {
    let stride = meta.side.pow(axis as u32);
    let c = (v / stride) % meta.side;
    let nc = (c + step) % meta.side;
    v - c * stride + nc * stride
}
