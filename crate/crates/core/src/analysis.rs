//! Components, diameters, ring spread and the BFS procedures used to probe
//! percolation graphs.
//!
//! All traversals explore neighbours in ascending order, so traces are
//! reproducible and can be compared against hand-computed expectations.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{Adjacency, Graph};
use crate::model::{ring_dist, PercolationGraph, SmallWorldGraph};
use crate::{Error, Result};

/// Node sets up to this size get an exact diameter.
pub const DIAMETER_EXACT_LIMIT: usize = 10_000;

/// Diameter of an induced subgraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diameter {
    Exact(usize),
    /// `lower <= diameter <= upper`, from double sweeps and an eccentricity.
    Bounds { lower: usize, upper: usize },
    /// The set does not induce a connected subgraph.
    Infinite,
}

impl Diameter {
    pub fn is_finite(&self) -> bool {
        !matches!(self, Diameter::Infinite)
    }

    /// Best available upper bound; `None` when infinite.
    pub fn upper(&self) -> Option<usize> {
        match *self {
            Diameter::Exact(d) => Some(d),
            Diameter::Bounds { upper, .. } => Some(upper),
            Diameter::Infinite => None,
        }
    }

    pub fn lower(&self) -> Option<usize> {
        match *self {
            Diameter::Exact(d) => Some(d),
            Diameter::Bounds { lower, .. } => Some(lower),
            Diameter::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    /// Components ordered by smallest member; members ascending.
    pub components: Vec<Vec<usize>>,
    pub largest_size: usize,
    pub largest_fraction: f64,
    pub largest_diameter: Diameter,
}

/// Per-node component labels; label `i` is the `i`-th component by smallest
/// member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    pub label: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl Labels {
    pub fn largest(&self) -> usize {
        self.sizes
            .iter()
            .enumerate()
            .fold((0, 0), |best, (i, &s)| if s > best.1 { (i, s) } else { best })
            .0
    }

    pub fn members(&self, component: usize) -> Vec<usize> {
        (0..self.label.len()).filter(|&u| self.label[u] == component).collect()
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Component labels by union-find over every edge.
pub fn component_labels(g: &impl Adjacency) -> Labels {
    let n = g.node_count();
    let mut sets = DisjointSets::new(n);
    for u in 0..n {
        for &v in g.neighbors(u) {
            if v > u {
                sets.union(u, v);
            }
        }
    }
    let mut root_label = vec![usize::MAX; n];
    let mut label = vec![0; n];
    let mut sizes = Vec::new();
    for u in 0..n {
        let r = sets.find(u);
        if root_label[r] == usize::MAX {
            root_label[r] = sizes.len();
            sizes.push(0);
        }
        label[u] = root_label[r];
        sizes[label[u]] += 1;
    }
    Labels { label, sizes }
}

/// Exact partition into connected components, plus the size, fraction and
/// diameter of the largest one (ties go to the smallest member).
pub fn connected_components(g: &impl Adjacency) -> ComponentReport {
    let n = g.node_count();
    let labels = component_labels(g);
    let mut components: Vec<Vec<usize>> = labels.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
    for u in 0..n {
        components[labels.label[u]].push(u);
    }
    let largest = labels.largest();
    let largest_size = labels.sizes.get(largest).copied().unwrap_or(0);
    let largest_diameter = match components.get(largest) {
        Some(c) => diameter(g, c).expect("non-empty component"),
        None => Diameter::Exact(0),
    };
    ComponentReport {
        largest_size,
        largest_fraction: if n == 0 { 0.0 } else { largest_size as f64 / n as f64 },
        largest_diameter,
        components,
    }
}

/// The component of `s`, found by the sequential queue-based visit.
pub fn component_of(g: &impl Adjacency, s: usize) -> Result<Vec<usize>> {
    let trace = bfs_with_removed(g, s, &[], None)?;
    let mut c = trace.visited_order;
    c.sort_unstable();
    Ok(c)
}

/// BFS distances from `sources` restricted to nodes with `inside[u]`;
/// unreachable nodes get `usize::MAX`. Reuses `dist` and `queue`.
fn bfs_levels(
    g: &impl Adjacency,
    sources: &[usize],
    inside: impl Fn(usize) -> bool,
    dist: &mut [usize],
    queue: &mut VecDeque<usize>,
    touched: &mut Vec<usize>,
) -> (usize, usize) {
    for &u in touched.iter() {
        dist[u] = usize::MAX;
    }
    touched.clear();
    queue.clear();
    for &s in sources {
        dist[s] = 0;
        touched.push(s);
        queue.push_back(s);
    }
    // (eccentricity, farthest node with the smallest id)
    let mut far = (0, sources[0]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u];
        if du > far.0 || (du == far.0 && u < far.1) {
            far = (du, u);
        }
        for &v in g.neighbors(u) {
            if dist[v] == usize::MAX && inside(v) {
                dist[v] = du + 1;
                touched.push(v);
                queue.push_back(v);
            }
        }
    }
    far
}

/// Diameter of the subgraph induced by `set`.
///
/// Exact for up to [`DIAMETER_EXACT_LIMIT`] nodes; larger sets get bounds.
pub fn diameter(g: &impl Adjacency, set: &[usize]) -> Result<Diameter> {
    diameter_with_limit(g, set, DIAMETER_EXACT_LIMIT)
}

pub fn diameter_with_limit(g: &impl Adjacency, set: &[usize], exact_limit: usize) -> Result<Diameter> {
    if set.is_empty() {
        return Err(Error::input("diameter of an empty set"));
    }
    let n = g.node_count();
    if let Some(&u) = set.iter().find(|&&u| u >= n) {
        return Err(Error::input(format!("node {u} out of range for n = {n}")));
    }
    let mut inside = vec![false; n];
    for &u in set {
        inside[u] = true;
    }
    let members = inside.iter().filter(|&&b| b).count();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let mut touched = Vec::new();
    bfs_levels(g, &set[..1], |v| inside[v], &mut dist, &mut queue, &mut touched);
    if touched.len() < members {
        return Ok(Diameter::Infinite);
    }
    if members <= exact_limit {
        return Ok(Diameter::Exact(fringe_diameter(g, set[0], |v| inside[v], n)));
    }
    Ok(diameter_bounds(g, set[0], |v| inside[v], n))
}

/// Walks back from `b` along decreasing `dist` to a node at distance
/// `dist[b] / 2` from the BFS root.
fn midpoint(g: &impl Adjacency, b: usize, dist: &[usize], inside: impl Fn(usize) -> bool) -> usize {
    let half = dist[b] / 2;
    let mut mid = b;
    while dist[mid] > half {
        let d = dist[mid];
        mid = *g
            .neighbors(mid)
            .iter()
            .find(|&&w| inside(w) && dist[w] == d - 1)
            .expect("BFS predecessor");
    }
    mid
}

/// Exact diameter of a connected set by iterative fringe upper bounds: BFS
/// from a central node, then take eccentricities of its levels from the
/// outermost inwards until no deeper pair can remain.
fn fringe_diameter(g: &impl Adjacency, start: usize, inside: impl Fn(usize) -> bool + Copy + Sync, n: usize) -> usize {
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let mut touched = Vec::new();
    let (_, a) = bfs_levels(g, &[start], inside, &mut dist, &mut queue, &mut touched);
    let (_, b) = bfs_levels(g, &[a], inside, &mut dist, &mut queue, &mut touched);
    let root = midpoint(g, b, &dist, inside);
    let (ecc_root, _) = bfs_levels(g, &[root], inside, &mut dist, &mut queue, &mut touched);
    let mut levels = vec![Vec::new(); ecc_root + 1];
    for &u in &touched {
        levels[dist[u]].push(u);
    }
    let mut lower = ecc_root;
    let mut i = ecc_root;
    while i > 0 && 2 * i > lower {
        let fringe = levels[i]
            .par_iter()
            .map_init(
                || (vec![usize::MAX; n], VecDeque::new(), Vec::new()),
                |(dist, queue, touched), &s| bfs_levels(g, &[s], inside, dist, queue, touched).0,
            )
            .max()
            .unwrap_or(0);
        lower = lower.max(fringe);
        if lower > 2 * (i - 1) {
            break;
        }
        i -= 1;
    }
    lower
}

/// Double-sweep lower bound and `2 * ecc(center)` upper bound.
fn diameter_bounds(g: &impl Adjacency, start: usize, inside: impl Fn(usize) -> bool + Copy, n: usize) -> Diameter {
    const SWEEPS: usize = 4;
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let mut touched = Vec::new();
    let mut lower = 0;
    let mut upper = usize::MAX;
    let mut from = start;
    for _ in 0..SWEEPS {
        let (ecc_a, a) = bfs_levels(g, &[from], inside, &mut dist, &mut queue, &mut touched);
        upper = upper.min(2 * ecc_a);
        let (ecc_b, b) = bfs_levels(g, &[a], inside, &mut dist, &mut queue, &mut touched);
        lower = lower.max(ecc_b);
        upper = upper.min(2 * ecc_b);
        let mid = midpoint(g, b, &dist, inside);
        let (ecc_mid, _) = bfs_levels(g, &[mid], inside, &mut dist, &mut queue, &mut touched);
        upper = upper.min(2 * ecc_mid);
        if lower == upper {
            break;
        }
        from = b;
    }
    if lower == upper {
        Diameter::Exact(lower)
    } else {
        Diameter::Bounds { lower, upper }
    }
}

/// Largest ring distance from `s` to a node of its component.
pub fn ring_spread(g: &impl Adjacency, s: usize) -> Result<usize> {
    let n = g.node_count();
    Ok(component_of(g, s)?
        .into_iter()
        .map(|u| ring_dist(n, s, u))
        .max()
        .unwrap_or(0))
}

/// [`ring_spread`] for every node at once, in `O(n log n)`.
pub fn ring_spreads(g: &impl Adjacency, labels: &Labels) -> Vec<usize> {
    let n = g.node_count();
    let mut members: Vec<Vec<usize>> = labels.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
    for u in 0..n {
        members[labels.label[u]].push(u);
    }
    let mut spread = vec![0; n];
    for sorted in &members {
        if sorted.len() == 1 {
            continue;
        }
        // The farthest member from s is the one nearest the antipode
        // s + n/2, which lies next to one of two integer targets.
        let len = sorted.len();
        for &s in sorted {
            let mut best = 0;
            for t in [(s + n / 2) % n, (s + n.div_ceil(2)) % n] {
                let i = sorted.partition_point(|&x| x < t);
                for u in [sorted[i % len], sorted[(i + len - 1) % len]] {
                    best = best.max(ring_dist(n, s, u));
                }
            }
            spread[s] = best;
        }
    }
    spread
}

/// Anything with a degree sequence.
pub trait Degrees {
    fn degree_sequence(&self) -> Vec<usize>;
}

impl Degrees for SmallWorldGraph {
    fn degree_sequence(&self) -> Vec<usize> {
        self.degrees()
    }
}

impl Degrees for PercolationGraph {
    fn degree_sequence(&self) -> Vec<usize> {
        self.degrees()
    }
}

impl Degrees for Graph {
    fn degree_sequence(&self) -> Vec<usize> {
        (0..self.node_count()).map(|u| self.degree(u)).collect()
    }
}

pub fn max_degree(g: &impl Degrees) -> usize {
    g.degree_sequence().into_iter().max().unwrap_or(0)
}

/// Bookkeeping of a BFS run.
///
/// Index `t` of the per-iteration vectors describes while-loop iteration
/// `t + 1`. `added[t]` is the number of nodes enqueued in that iteration and
/// `queue_sizes[t]` the queue length after it. `terminal_r` excludes the
/// initially removed nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BfsTrace {
    pub visited_order: Vec<usize>,
    pub queue_sizes: Vec<usize>,
    pub added: Vec<usize>,
    /// `|(R \ R0) ∪ Q|` after each iteration.
    pub reached_sizes: Vec<usize>,
    pub rounds: usize,
    pub terminal_q: Vec<usize>,
    pub terminal_r: Vec<usize>,
}

impl BfsTrace {
    pub fn exhausted(&self) -> bool {
        self.terminal_q.is_empty()
    }

    /// Checks `|Q_t| = |Q_{t-1}| + W_t - 1` for a sequential visit started
    /// from one node.
    pub fn satisfies_queue_recursion(&self) -> bool {
        let mut prev = 1usize;
        for (&q, &w) in self.queue_sizes.iter().zip(&self.added) {
            if prev == 0 || q + 1 != prev + w {
                return false;
            }
            prev = q;
        }
        true
    }

    /// Every node reached so far: visited plus still queued.
    pub fn reached(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.terminal_r.iter().chain(&self.terminal_q).copied().collect();
        all.sort_unstable();
        all
    }
}

const FREE: u8 = 0;
const REMOVED: u8 = 1;
const VISITED: u8 = 2;
const QUEUED: u8 = 3;

fn mark_removed(n: usize, removed: &[usize]) -> Result<Vec<u8>> {
    let mut state = vec![FREE; n];
    for &r in removed {
        if r >= n {
            return Err(Error::input(format!("node {r} out of range for n = {n}")));
        }
        state[r] = REMOVED;
    }
    Ok(state)
}

/// Sequential visit over `state`: dequeue, mark visited, enqueue each
/// neighbour that is neither removed, visited nor already queued.
fn sequential_visit(g: &impl Adjacency, s: usize, state: &mut [u8], max_iterations: Option<usize>) -> BfsTrace {
    let mut queue = VecDeque::from([s]);
    state[s] = QUEUED;
    let mut trace = BfsTrace {
        visited_order: Vec::new(),
        queue_sizes: Vec::new(),
        added: Vec::new(),
        reached_sizes: Vec::new(),
        rounds: 0,
        terminal_q: Vec::new(),
        terminal_r: Vec::new(),
    };
    let limit = max_iterations.unwrap_or(usize::MAX);
    while trace.rounds < limit {
        let Some(w) = queue.pop_front() else { break };
        state[w] = VISITED;
        trace.visited_order.push(w);
        let mut added = 0;
        for &x in g.neighbors(w) {
            if state[x] == FREE {
                state[x] = QUEUED;
                queue.push_back(x);
                added += 1;
            }
        }
        trace.rounds += 1;
        trace.added.push(added);
        trace.queue_sizes.push(queue.len());
        trace.reached_sizes.push(trace.visited_order.len() + queue.len());
    }
    trace.terminal_q = queue.into_iter().collect();
    trace.terminal_r = trace.visited_order.clone();
    trace.terminal_r.sort_unstable();
    trace
}

/// Sequential BFS from `s` that treats `removed` as already visited.
///
/// Stops after `max_iterations` while-loop iterations when given.
pub fn bfs_with_removed(
    g: &impl Adjacency,
    s: usize,
    removed: &[usize],
    max_iterations: Option<usize>,
) -> Result<BfsTrace> {
    let n = g.node_count();
    if s >= n {
        return Err(Error::input(format!("source {s} out of range for n = {n}")));
    }
    let mut state = mark_removed(n, removed)?;
    if state[s] == REMOVED {
        return Err(Error::input(format!("source {s} is in the removed set")));
    }
    Ok(sequential_visit(g, s, &mut state, max_iterations))
}

/// Level-synchronous BFS: each round retires the whole frontier and the next
/// frontier is every unseen, non-removed neighbour of it, each enqueued once.
pub fn parallel_bfs(
    g: &impl Adjacency,
    initiators: &[usize],
    removed: &[usize],
    max_rounds: Option<usize>,
) -> Result<BfsTrace> {
    let n = g.node_count();
    if initiators.is_empty() {
        return Err(Error::input("parallel BFS needs at least one initiator"));
    }
    let mut state = mark_removed(n, removed)?;
    let mut frontier = Vec::with_capacity(initiators.len());
    for &s in initiators {
        if s >= n {
            return Err(Error::input(format!("initiator {s} out of range for n = {n}")));
        }
        match state[s] {
            REMOVED => return Err(Error::input(format!("initiator {s} is in the removed set"))),
            QUEUED => {}
            _ => {
                state[s] = QUEUED;
                frontier.push(s);
            }
        }
    }
    frontier.sort_unstable();
    Ok(level_visit(g, frontier, &mut state, max_rounds))
}

fn level_visit(g: &impl Adjacency, mut frontier: Vec<usize>, state: &mut [u8], max_rounds: Option<usize>) -> BfsTrace {
    let mut trace = BfsTrace {
        visited_order: Vec::new(),
        queue_sizes: Vec::new(),
        added: Vec::new(),
        reached_sizes: Vec::new(),
        rounds: 0,
        terminal_q: Vec::new(),
        terminal_r: Vec::new(),
    };
    let limit = max_rounds.unwrap_or(usize::MAX);
    while !frontier.is_empty() && trace.rounds < limit {
        let mut next = Vec::new();
        for &w in &frontier {
            state[w] = VISITED;
            trace.visited_order.push(w);
        }
        for &w in &frontier {
            for &x in g.neighbors(w) {
                if state[x] == FREE {
                    state[x] = QUEUED;
                    next.push(x);
                }
            }
        }
        next.sort_unstable();
        trace.rounds += 1;
        trace.added.push(next.len());
        trace.queue_sizes.push(next.len());
        trace.reached_sizes.push(trace.visited_order.len() + next.len());
        frontier = next;
    }
    trace.terminal_q = frontier;
    trace.terminal_r = trace.visited_order.clone();
    trace.terminal_r.sort_unstable();
    trace
}

/// Constants of the restart process. The thresholds scale with the natural
/// log of the node count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartParams {
    /// Sequential iterations per attempt: `ceil(tau_multiplier * ln n)`.
    pub tau_multiplier: f64,
    /// Queue threshold: `beta_log * ln n`.
    pub beta_log: f64,
    /// Reach threshold: `n / k_frac`.
    pub k_frac: f64,
    /// Give up after this many attempts; `None` runs until nodes run out.
    pub max_restarts: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartTrigger {
    /// `|(R \ R0) ∪ Q|` reached `n / k_frac`.
    Reached,
    /// `|Q|` reached `beta_log * ln n`; a level-synchronous follow-up ran.
    Queue,
    NoTrigger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub restarts: usize,
    pub trigger: RestartTrigger,
    /// Nodes reached by the triggering attempt, including its follow-up.
    pub reached: usize,
    /// Rounds of the follow-up level-synchronous visit.
    pub followup_rounds: usize,
    pub tau1: usize,
    pub queue_threshold: f64,
    pub reach_threshold: f64,
}

/// Repeated short sequential visits from fresh nodes, each one excluding
/// everything earlier attempts touched, until one of them either grows a
/// large queue or reaches a constant fraction of the graph.
pub fn restart_search(g: &impl Adjacency, params: &RestartParams) -> Result<RestartOutcome> {
    let n = g.node_count();
    if !(params.tau_multiplier > 0.0 && params.beta_log > 0.0 && params.k_frac >= 1.0) {
        return Err(Error::input(format!("invalid restart parameters {params:?}")));
    }
    let ln_n = (n.max(2) as f64).ln();
    let tau1 = (params.tau_multiplier * ln_n).ceil().max(1.0) as usize;
    let queue_threshold = params.beta_log * ln_n;
    let reach_threshold = n as f64 / params.k_frac;
    let mut outcome = RestartOutcome {
        restarts: 0,
        trigger: RestartTrigger::NoTrigger,
        reached: 0,
        followup_rounds: 0,
        tau1,
        queue_threshold,
        reach_threshold,
    };

    // Every node an attempt touches joins the removed set afterwards, so the
    // state array never needs resetting.
    let mut state = vec![FREE; n];
    let mut next_free = 0;
    loop {
        if params.max_restarts.is_some_and(|m| outcome.restarts >= m) {
            return Ok(outcome);
        }
        while next_free < n && state[next_free] != FREE {
            next_free += 1;
        }
        if next_free == n {
            return Ok(outcome);
        }
        outcome.restarts += 1;
        let trace = sequential_visit(g, next_free, &mut state, Some(tau1));
        let reached = trace.visited_order.len() + trace.terminal_q.len();
        if reached as f64 >= reach_threshold {
            outcome.trigger = RestartTrigger::Reached;
            outcome.reached = reached;
            return Ok(outcome);
        }
        if trace.terminal_q.len() as f64 >= queue_threshold {
            // Continue level-synchronously from the queue; the visited part of
            // this attempt stays excluded along with all earlier attempts.
            let mut frontier = trace.terminal_q.clone();
            frontier.sort_unstable();
            let follow = level_visit(g, frontier, &mut state, None);
            outcome.trigger = RestartTrigger::Queue;
            outcome.reached = trace.visited_order.len() + follow.visited_order.len();
            outcome.followup_rounds = follow.rounds;
            return Ok(outcome);
        }
        for &u in trace.visited_order.iter().chain(&trace.terminal_q) {
            state[u] = REMOVED;
        }
    }
}
