//! Plain undirected graphs in compressed adjacency form.

use crate::{Error, Result};

/// Read access to a node-indexed undirected graph.
///
/// Neighbour slices are sorted ascending; every traversal in the crate relies
/// on that for deterministic visit order.
pub trait Adjacency: Sync {
    fn node_count(&self) -> usize;

    fn neighbors(&self, u: usize) -> &[usize];

    fn degree(&self, u: usize) -> usize {
        self.neighbors(u).len()
    }
}

/// A simple undirected graph with stable edge ids.
///
/// Edge `i` is `edges()[i]`, stored as `(min, max)`. The adjacency of `u`
/// lists neighbours ascending alongside the id of the connecting edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    edge_ids: Vec<usize>,
}

impl Graph {
    /// Builds a graph, rejecting loops, out-of-range endpoints and parallel
    /// edges.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        for &(u, v) in &edges {
            if v >= n {
                return Err(Error::input(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            if u == v {
                return Err(Error::input(format!("self-loop at {u}")));
            }
        }
        let g = Self::build(n, edges);
        for u in 0..n {
            if g.neighbors(u).windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::input(format!("parallel edges at node {u}")));
            }
        }
        Ok(g)
    }

    /// Trusted constructor: `edges` must already be canonical and simple.
    pub(crate) fn build(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for &(u, v) in &edges {
            offsets[u + 1] += 1;
            offsets[v + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut slots = vec![(0usize, 0usize); offsets[n]];
        for (id, &(u, v)) in edges.iter().enumerate() {
            slots[cursor[u]] = (v, id);
            cursor[u] += 1;
            slots[cursor[v]] = (u, id);
            cursor[v] += 1;
        }
        for u in 0..n {
            slots[offsets[u]..offsets[u + 1]].sort_unstable();
        }
        let (targets, edge_ids) = slots.into_iter().unzip();
        Self {
            n,
            edges,
            offsets,
            targets,
            edge_ids,
        }
    }

    pub fn path(n: usize) -> Self {
        Self::build(n, (1..n).map(|v| (v - 1, v)).collect())
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `(neighbour, edge id)` pairs of `u`, neighbours ascending.
    pub fn incident(&self, u: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let range = self.offsets[u]..self.offsets[u + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.edge_ids[range].iter().copied())
    }

    pub fn edge_id(&self, u: usize, v: usize) -> Option<usize> {
        if u >= self.n || v >= self.n {
            return None;
        }
        let nb = self.neighbors(u);
        nb.binary_search(&v)
            .ok()
            .map(|i| self.edge_ids[self.offsets[u] + i])
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge_id(u, v).is_some()
    }
}

impl Adjacency for Graph {
    fn node_count(&self) -> usize {
        self.n
    }

    fn neighbors(&self, u: usize) -> &[usize] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }
}
