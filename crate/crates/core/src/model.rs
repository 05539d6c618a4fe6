//! The power-law small-world ring distribution and bond percolation on it.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::graph::{Adjacency, Graph};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Smallest ring with a non-adjacent pair.
pub const MIN_NODES: usize = 5;

/// Largest ring the pairwise sampler accepts.
pub const NAIVE_MAX_NODES: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Ring,
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// One Bernoulli draw per candidate pair.
    Naive,
    /// One binomial draw per distance class, then uniform placement.
    Fast,
}

/// Shortest distance between `u` and `v` along the ring of `n` nodes.
pub fn ring_distance(n: usize, u: usize, v: usize) -> Result<usize> {
    if u >= n || v >= n {
        return Err(Error::input(format!("nodes ({u}, {v}) out of range for n = {n}")));
    }
    Ok(ring_dist(n, u, v))
}

#[inline]
pub(crate) fn ring_dist(n: usize, u: usize, v: usize) -> usize {
    let d = u.abs_diff(v);
    d.min(n - d)
}

fn check_params(n: usize, alpha: f64) -> Result<()> {
    if n < MIN_NODES {
        return Err(Error::input(format!("n = {n}; need at least {MIN_NODES} nodes")));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::input(format!("alpha = {alpha}; need a finite alpha > 0")));
    }
    Ok(())
}

/// `C(alpha, n) = 2 * sum_{x=2}^{floor(n/2)} x^-alpha`, summed from the
/// smallest term up.
///
/// For huge `alpha` this underflows; probabilities are computed from
/// [`distance_probabilities`], which does not.
pub fn normalizing_constant(n: usize, alpha: f64) -> Result<f64> {
    if n < MIN_NODES {
        return Err(Error::input(format!("n = {n}; need at least {MIN_NODES} nodes")));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::input(format!("alpha = {alpha}; need a finite alpha >= 0")));
    }
    let sum: f64 = (2..=n / 2).rev().map(|x| (x as f64).powf(-alpha)).sum();
    Ok(2.0 * sum)
}

/// Bridge probability for every ring distance: entry `d` holds
/// `d^-alpha / C(alpha, n)` for `2 <= d <= floor(n/2)`; entries 0 and 1 are 0.
///
/// Evaluated as `(2/d)^alpha / (2 * sum_x (2/x)^alpha)` so that no term
/// underflows before the division. Every entry is at most 1/2.
pub fn distance_probabilities(n: usize, alpha: f64) -> Result<Vec<f64>> {
    check_params(n, alpha)?;
    let half = n / 2;
    let scaled: Vec<f64> = (0..=half)
        .map(|d| if d < 2 { 0.0 } else { (2.0 / d as f64).powf(alpha) })
        .collect();
    let total: f64 = scaled[2..].iter().rev().sum();
    Ok(scaled.into_iter().map(|s| s / (2.0 * total)).collect())
}

/// Probability that the bridge `(u, v)` is present.
pub fn bridge_probability(n: usize, alpha: f64, u: usize, v: usize) -> Result<f64> {
    let d = ring_distance(n, u, v)?;
    if d < 2 {
        return Err(Error::input(format!(
            "({u}, {v}) are at ring distance {d}; bridges need distance >= 2"
        )));
    }
    Ok(distance_probabilities(n, alpha)?[d])
}

/// Number of unordered pairs at ring distance `x` on a ring of `n` nodes.
pub fn pairs_at_distance(n: usize, x: usize) -> usize {
    if x == 0 || x > n / 2 {
        0
    } else if 2 * x == n {
        n / 2
    } else {
        n
    }
}

/// A sample of the small-world distribution: ring `0..n` plus bridges.
///
/// Ring edges `(i, i+1 mod n)` are implicit. Bridges are canonical `(min, max)`
/// pairs, sorted, with ring distance at least 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallWorldGraph {
    n: usize,
    alpha: f64,
    seed: u64,
    bridges: Vec<(usize, usize)>,
}

impl SmallWorldGraph {
    /// Assembles a graph from an explicit bridge list, checking every
    /// invariant. Bridge order and orientation do not matter.
    pub fn from_parts(
        n: usize,
        alpha: f64,
        seed: u64,
        bridges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        check_params(n, alpha)?;
        let mut bridges: Vec<(usize, usize)> = bridges
            .into_iter()
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        bridges.sort_unstable();
        for w in bridges.windows(2) {
            if w[0] == w[1] {
                return Err(Error::input(format!("duplicate bridge {:?}", w[0])));
            }
        }
        for &(u, v) in &bridges {
            if ring_distance(n, u, v)? < 2 {
                return Err(Error::input(format!("({u}, {v}) is not a bridge candidate")));
            }
        }
        Ok(Self {
            n,
            alpha,
            seed,
            bridges,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bridges(&self) -> &[(usize, usize)] {
        &self.bridges
    }

    pub fn has_bridge(&self, u: usize, v: usize) -> bool {
        self.bridges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    /// Ring edge `i` joins `i` and `i + 1 mod n`; returned canonically.
    pub fn ring_edge(&self, i: usize) -> (usize, usize) {
        let j = (i + 1) % self.n;
        (i.min(j), i.max(j))
    }

    pub fn ring_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).map(|i| self.ring_edge(i))
    }

    /// Index of the ring edge joining `u` and `v`, if they are ring-adjacent.
    pub fn ring_edge_index(&self, u: usize, v: usize) -> Option<usize> {
        let n = self.n;
        if u >= n || v >= n {
            None
        } else if (u + 1) % n == v {
            Some(u)
        } else if (v + 1) % n == u {
            Some(v)
        } else {
            None
        }
    }

    pub fn edge_count(&self) -> usize {
        self.n + self.bridges.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![2; self.n];
        for &(u, v) in &self.bridges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Ring edges (ids `0..n`) followed by bridges (ids `n..`).
    pub fn to_graph(&self) -> Graph {
        let edges = self.ring_edges().chain(self.bridges.iter().copied()).collect();
        Graph::build(self.n, edges)
    }
}

/// Draws a graph from the small-world distribution.
pub fn sample_small_world(
    n: usize,
    alpha: f64,
    stream: &RngStream,
    mode: SamplingMode,
) -> Result<SmallWorldGraph> {
    let q = distance_probabilities(n, alpha)?;
    let mut rng = stream.rng();
    let mut bridges = Vec::new();
    match mode {
        SamplingMode::Naive => {
            if n > NAIVE_MAX_NODES {
                return Err(Error::input(format!(
                    "naive sampling is limited to n <= {NAIVE_MAX_NODES}"
                )));
            }
            for u in 0..n {
                for v in u + 2..n {
                    let d = ring_dist(n, u, v);
                    if d >= 2 && rng.random::<f64>() < q[d] {
                        bridges.push((u, v));
                    }
                }
            }
        }
        SamplingMode::Fast => {
            for (x, &qx) in q.iter().enumerate().skip(2) {
                let m = pairs_at_distance(n, x);
                let k = Binomial::new(m as u64, qx)
                    .expect("probability in [0, 1/2]")
                    .sample(&mut rng) as usize;
                if k == 0 {
                    continue;
                }
                // Pair i of class x is (i, i + x mod n); for 2x = n the first
                // n/2 indices already cover every antipodal pair once.
                for i in index::sample(&mut rng, m, k) {
                    let j = (i + x) % n;
                    bridges.push((i.min(j), i.max(j)));
                }
            }
            bridges.sort_unstable();
        }
    }
    Ok(SmallWorldGraph {
        n,
        alpha,
        seed: stream.seed,
        bridges,
    })
}

/// The surviving edges of a graph after bond percolation.
#[derive(Debug, Clone)]
pub struct PercolationGraph {
    base: Arc<SmallWorldGraph>,
    p: f64,
    ring_kept: Vec<bool>,
    bridges_kept: Vec<(usize, usize)>,
    adjacency: Graph,
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::input(format!("p = {p}; need 0 <= p <= 1")));
    }
    Ok(())
}

/// Keeps every ring edge and bridge of `g` independently with probability
/// `p`. Draws one uniform per ring edge (in index order), then one per bridge.
pub fn percolate(g: &Arc<SmallWorldGraph>, p: f64, stream: &RngStream) -> Result<PercolationGraph> {
    check_p(p)?;
    let mut rng = stream.rng();
    let ring_kept: Vec<bool> = (0..g.n).map(|_| rng.random::<f64>() < p).collect();
    let bridges_kept = g
        .bridges
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() < p)
        .collect();
    Ok(PercolationGraph::assemble(Arc::clone(g), p, ring_kept, bridges_kept))
}

impl PercolationGraph {
    /// Builds a percolation graph from explicit surviving edge sets, checking
    /// that they are subsets of `base`.
    pub fn from_parts(
        base: Arc<SmallWorldGraph>,
        p: f64,
        ring_edges: impl IntoIterator<Item = (usize, usize)>,
        bridges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        check_p(p)?;
        let mut ring_kept = vec![false; base.n];
        for (u, v) in ring_edges {
            let i = base
                .ring_edge_index(u, v)
                .ok_or_else(|| Error::input(format!("({u}, {v}) is not a ring edge")))?;
            ring_kept[i] = true;
        }
        let mut kept: Vec<(usize, usize)> = bridges
            .into_iter()
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        kept.sort_unstable();
        kept.dedup();
        if let Some(&(u, v)) = kept.iter().find(|&&(u, v)| !base.has_bridge(u, v)) {
            return Err(Error::input(format!("({u}, {v}) is not a bridge of the base graph")));
        }
        Ok(Self::assemble(base, p, ring_kept, kept))
    }

    /// The unpercolated graph viewed as a percolation with `p = 1`.
    pub fn full(base: Arc<SmallWorldGraph>) -> Self {
        let ring_kept = vec![true; base.n];
        let bridges = base.bridges.clone();
        Self::assemble(base, 1.0, ring_kept, bridges)
    }

    fn assemble(
        base: Arc<SmallWorldGraph>,
        p: f64,
        ring_kept: Vec<bool>,
        bridges_kept: Vec<(usize, usize)>,
    ) -> Self {
        let edges = ring_kept
            .iter()
            .enumerate()
            .filter(|(_, &k)| k)
            .map(|(i, _)| base.ring_edge(i))
            .chain(bridges_kept.iter().copied())
            .collect();
        let adjacency = Graph::build(base.n, edges);
        Self {
            base,
            p,
            ring_kept,
            bridges_kept,
            adjacency,
        }
    }

    pub fn base(&self) -> &SmallWorldGraph {
        &self.base
    }

    pub fn base_arc(&self) -> &Arc<SmallWorldGraph> {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.base.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn ring_kept(&self, i: usize) -> bool {
        self.ring_kept[i]
    }

    pub fn surviving_ring_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.ring_kept
            .iter()
            .enumerate()
            .filter(|(_, &k)| k)
            .map(|(i, _)| self.base.ring_edge(i))
    }

    pub fn surviving_bridges(&self) -> &[(usize, usize)] {
        &self.bridges_kept
    }

    pub fn surviving_ring_count(&self) -> usize {
        self.ring_kept.iter().filter(|&&k| k).count()
    }

    /// Kind of the surviving edge `(u, v)`, or `None` if it did not survive.
    pub fn edge_kind(&self, u: usize, v: usize) -> Option<EdgeKind> {
        if let Some(i) = self.base.ring_edge_index(u, v) {
            return self.ring_kept[i].then_some(EdgeKind::Ring);
        }
        self.bridges_kept
            .binary_search(&(u.min(v), u.max(v)))
            .ok()
            .map(|_| EdgeKind::Bridge)
    }

    pub fn contains_edge(&self, u: usize, v: usize) -> bool {
        self.edge_kind(u, v).is_some()
    }

    /// The surviving edges as a plain graph: ring edges first, then bridges.
    pub fn graph(&self) -> &Graph {
        &self.adjacency
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n()).map(|u| self.adjacency.degree(u)).collect()
    }
}

impl Adjacency for PercolationGraph {
    fn node_count(&self) -> usize {
        self.base.n
    }

    fn neighbors(&self, u: usize) -> &[usize] {
        self.adjacency.neighbors(u)
    }
}
