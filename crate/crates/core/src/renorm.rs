//! Coarse-graining by ring intervals.
//!
//! An ℓ-graph collapses each run of `ell` consecutive ring nodes into one
//! super-node; two super-nodes are linked when any surviving edge joins their
//! intervals. Links between ring-adjacent intervals are super-edges, the rest
//! super-bridges. This module builds ℓ-graphs, runs the super-node visit that
//! keeps the two link kinds apart, estimates the isolation and super-bridge
//! rates of a fixed super-node, and computes the multi-scale interval schedule
//! used for `1 < alpha < 2`.

use std::io::Write;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{FromPrimitive, One};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{component_labels, diameter, Diameter, Labels};
use crate::graph::{Adjacency, Graph};
use crate::model::{distance_probabilities, normalizing_constant, percolate, sample_small_world, SamplingMode};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Direction of `Y_left` in [`super_component_of`]: the neighbour with the
/// next smaller interval index (mod the super-ring size).
pub const LEFT_IS_DECREASING: bool = true;

#[derive(Debug, Clone)]
pub struct EllGraph {
    n: usize,
    ell: usize,
    offset: usize,
    supernodes: usize,
    super_edges: Vec<(usize, usize)>,
    super_bridges: Vec<(usize, usize)>,
    links: Graph,
}

impl EllGraph {
    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn supernodes(&self) -> usize {
        self.supernodes
    }

    pub fn super_edges(&self) -> &[(usize, usize)] {
        &self.super_edges
    }

    pub fn super_bridges(&self) -> &[(usize, usize)] {
        &self.super_bridges
    }

    /// All links as a plain graph on the super-nodes.
    pub fn links(&self) -> &Graph {
        &self.links
    }

    /// Interval index of node `u`. The last interval absorbs the remainder
    /// when `ell` does not divide `n`.
    pub fn interval_of(&self, u: usize) -> usize {
        (((u + self.n - self.offset) % self.n) / self.ell).min(self.supernodes - 1)
    }

    pub fn interval_len(&self, j: usize) -> usize {
        if j + 1 == self.supernodes {
            self.n - self.ell * (self.supernodes - 1)
        } else {
            self.ell
        }
    }

    pub fn interval_nodes(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        let start = self.offset + j * self.ell;
        (0..self.interval_len(j)).map(move |i| (start + i) % self.n)
    }

    pub fn ring_adjacent(&self, a: usize, b: usize) -> bool {
        let d = a.abs_diff(b);
        d == 1 || d == self.supernodes - 1
    }

    pub fn left(&self, j: usize) -> usize {
        if LEFT_IS_DECREASING {
            (j + self.supernodes - 1) % self.supernodes
        } else {
            (j + 1) % self.supernodes
        }
    }

    pub fn has_link(&self, a: usize, b: usize) -> bool {
        self.links.has_edge(a, b)
    }
}

impl Adjacency for EllGraph {
    fn node_count(&self) -> usize {
        self.supernodes
    }

    fn neighbors(&self, u: usize) -> &[usize] {
        self.links.neighbors(u)
    }
}

/// Coarse-grains `gp` into intervals of `ell` nodes starting at `offset`.
pub fn build_ell_graph(gp: &impl Adjacency, ell: usize, offset: usize) -> Result<EllGraph> {
    let n = gp.node_count();
    if ell == 0 || ell > n / 3 {
        return Err(Error::input(format!("ell = {ell}; need 1 <= ell <= n/3 = {}", n / 3)));
    }
    if offset >= n {
        return Err(Error::input(format!("offset {offset} out of range for n = {n}")));
    }
    let mut eg = EllGraph {
        n,
        ell,
        offset,
        supernodes: n / ell,
        super_edges: Vec::new(),
        super_bridges: Vec::new(),
        links: Graph::build(0, Vec::new()),
    };
    let mut links = Vec::new();
    for u in 0..n {
        let a = eg.interval_of(u);
        for &v in gp.neighbors(u) {
            let b = eg.interval_of(v);
            if v > u && a != b {
                links.push((a.min(b), a.max(b)));
            }
        }
    }
    links.sort_unstable();
    links.dedup();
    let (edges, bridges): (Vec<_>, Vec<_>) = links.iter().partition(|&&(a, b)| eg.ring_adjacent(a, b));
    eg.super_edges = edges;
    eg.super_bridges = bridges;
    eg.links = Graph::build(eg.supernodes, links);
    Ok(eg)
}

/// Trace of the super-node visit.
///
/// Per while-loop iteration `t`: `x_counts[t]` super-edge additions,
/// `y_counts[t]` super-bridge additions and `y_left_counts[t]` additions of
/// the left neighbour of a super-bridge endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuperVisit {
    pub visit_order: Vec<usize>,
    pub x_counts: Vec<usize>,
    pub y_counts: Vec<usize>,
    pub y_left_counts: Vec<usize>,
}

impl SuperVisit {
    pub fn iterations(&self) -> usize {
        self.visit_order.len()
    }

    /// `|X_1| <= 2`, `|X_t| <= 1` afterwards, and at most `|X_t| + 2|Y_t|`
    /// super-nodes added per iteration.
    pub fn accounting_holds(&self) -> bool {
        self.x_counts.iter().enumerate().all(|(t, &x)| x <= if t == 0 { 2 } else { 1 })
            && (0..self.iterations())
                .all(|t| self.x_counts[t] + self.y_counts[t] + self.y_left_counts[t] <= self.x_counts[t] + 2 * self.y_counts[t])
    }
}

/// Queue-based visit of the ℓ-graph from `start` that enqueues super-edge
/// neighbours, then super-bridge neighbours `Y` together with `Y`'s left
/// neighbour when that one is unseen and linked to `Y`. A super-node is seen
/// from the moment it is enqueued.
pub fn super_component_of(eg: &EllGraph, start: usize) -> Result<SuperVisit> {
    if start >= eg.supernodes {
        return Err(Error::input(format!("super-node {start} out of range")));
    }
    let mut seen = vec![false; eg.supernodes];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start] = true;
    let mut visit = SuperVisit {
        visit_order: Vec::new(),
        x_counts: Vec::new(),
        y_counts: Vec::new(),
        y_left_counts: Vec::new(),
    };
    while let Some(w) = queue.pop_front() {
        visit.visit_order.push(w);
        let (mut x, mut y, mut yl) = (0, 0, 0);
        for &nb in eg.neighbors(w) {
            if eg.ring_adjacent(w, nb) && !seen[nb] {
                seen[nb] = true;
                queue.push_back(nb);
                x += 1;
            }
        }
        for &nb in eg.neighbors(w) {
            if !eg.ring_adjacent(w, nb) && !seen[nb] {
                seen[nb] = true;
                queue.push_back(nb);
                y += 1;
                let left = eg.left(nb);
                if !seen[left] && eg.has_link(left, nb) {
                    seen[left] = true;
                    queue.push_back(left);
                    yl += 1;
                }
            }
        }
        visit.x_counts.push(x);
        visit.y_counts.push(y);
        visit.y_left_counts.push(yl);
    }
    Ok(visit)
}

/// Number of nodes `s` violating `|Γ(s)| <= len * |Γ_ℓ(I(s))|`, where `len` is
/// `ell`, or the longest interval when the last one absorbs a remainder.
pub fn coarse_size_violations(gp_labels: &Labels, eg: &EllGraph) -> usize {
    let super_labels = component_labels(eg);
    let len = (0..eg.supernodes).map(|j| eg.interval_len(j)).max().unwrap_or(eg.ell);
    (0..gp_labels.label.len())
        .filter(|&s| {
            let comp = gp_labels.sizes[gp_labels.label[s]];
            let sup = super_labels.sizes[super_labels.label[eg.interval_of(s)]];
            comp > len * sup
        })
        .count()
}

/// Probability that a fixed node has at least one bridge longer than `x`.
pub fn bridge_length_tail(n: usize, alpha: f64, x: usize) -> Result<f64> {
    let q = distance_probabilities(n, alpha)?;
    if x == 0 {
        return Err(Error::input("bridge lengths start at 2; need x >= 1"));
    }
    let log_none: f64 = (x + 1..=n / 2)
        .rev()
        .map(|d| {
            let partners = if 2 * d == n { 1.0 } else { 2.0 };
            partners * (-q[d]).ln_1p()
        })
        .sum();
    Ok(-log_none.exp_m1())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsolationReport {
    pub n: usize,
    pub alpha: f64,
    pub p: f64,
    pub ell: usize,
    pub trials: usize,
    pub rate_isolated: f64,
    pub rate_superbridge: f64,
    /// `(1-p)^2 e^{-2/(alpha-2)}`.
    pub isolated_lower_bound: f64,
    /// `2 / ((alpha-2) ell^{alpha-2})`.
    pub superbridge_upper_bound: f64,
    /// Binomial standard errors evaluated at the bounds.
    pub sigma_isolated: f64,
    pub sigma_superbridge: f64,
    pub coarse_size_violations: usize,
}

impl IsolationReport {
    pub fn isolated_bound_holds(&self) -> bool {
        self.rate_isolated >= self.isolated_lower_bound - 3.0 * self.sigma_isolated
    }

    pub fn superbridge_bound_holds(&self) -> bool {
        self.rate_superbridge <= self.superbridge_upper_bound + 3.0 * self.sigma_superbridge
    }
}

fn binomial_sigma(q: f64, trials: usize) -> f64 {
    let q = q.clamp(0.0, 1.0);
    (q * (1.0 - q) / trials as f64).sqrt()
}

/// Monte-Carlo rates at which super-node 0 (offset 0) is isolated, and is
/// incident to a super-bridge, over fresh graph and percolation samples.
/// Trial `t` draws its graph from stream `2t` and percolation from `2t + 1`.
pub fn supernode_isolation_rate(
    n: usize,
    alpha: f64,
    p: f64,
    ell: usize,
    trials: usize,
    stream: &RngStream,
) -> Result<IsolationReport> {
    if trials == 0 {
        return Err(Error::input("need at least one trial"));
    }
    if ell == 0 || ell > n / 3 {
        return Err(Error::input(format!("ell = {ell}; need 1 <= ell <= n/3")));
    }
    let base = stream.derive(0x150);
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(bool, bool, usize)> {
            let g = Arc::new(sample_small_world(n, alpha, &base.with_stream(2 * t as u64), SamplingMode::Fast)?);
            let gp = percolate(&g, p, &base.with_stream(2 * t as u64 + 1))?;
            let eg = build_ell_graph(&gp, ell, 0)?;
            let isolated = eg.neighbors(0).is_empty();
            let bridged = eg.neighbors(0).iter().any(|&b| !eg.ring_adjacent(0, b));
            let violations = coarse_size_violations(&component_labels(&gp), &eg);
            Ok((isolated, bridged, violations))
        })
        .collect::<Result<Vec<_>>>()?;
    let isolated = outcomes.iter().filter(|o| o.0).count();
    let bridged = outcomes.iter().filter(|o| o.1).count();
    let violations = outcomes.iter().map(|o| o.2).sum();
    let lower = (1.0 - p).powi(2) * (-2.0 / (alpha - 2.0)).exp();
    let upper = 2.0 / ((alpha - 2.0) * (ell as f64).powf(alpha - 2.0));
    Ok(IsolationReport {
        n,
        alpha,
        p,
        ell,
        trials,
        rate_isolated: isolated as f64 / trials as f64,
        rate_superbridge: bridged as f64 / trials as f64,
        isolated_lower_bound: lower,
        superbridge_upper_bound: upper,
        sigma_isolated: binomial_sigma(lower, trials),
        sigma_superbridge: binomial_sigma(upper, trials),
        coarse_size_violations: violations,
    })
}

/// Outcome of the interval event: a set covering `(1 - eps)` of the interval
/// whose induced diameter is at most `d_max`, using interval-internal edges
/// only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalEvent {
    pub holds: bool,
    /// Largest internal component (ties: first in arc order), ascending ids.
    pub witness: Vec<usize>,
    pub diameter: Diameter,
}

/// Checks the interval event on the arc `start, start+1, ..., start+len-1`
/// (mod n).
pub fn interval_event_check(gp: &impl Adjacency, start: usize, len: usize, eps: f64, d_max: usize) -> Result<IntervalEvent> {
    let n = gp.node_count();
    if len == 0 {
        return Err(Error::input("empty interval"));
    }
    if len > n || start >= n {
        return Err(Error::input(format!("interval ({start}, len {len}) does not fit n = {n}")));
    }
    let local = |u: usize| {
        let i = (u + n - start) % n;
        (i < len).then_some(i)
    };
    let mut edges = Vec::new();
    for i in 0..len {
        let u = (start + i) % n;
        for &v in gp.neighbors(u) {
            if let Some(j) = local(v) {
                if j > i {
                    edges.push((i, j));
                }
            }
        }
    }
    let sub = Graph::build(len, edges);
    let labels = component_labels(&sub);
    let members = labels.members(labels.largest());
    let diameter = diameter(&sub, &members)?;
    // Slack absorbs rounding when eps is itself a computed fraction.
    let holds = members.len() as f64 >= (1.0 - eps) * len as f64 - 1e-9
        && diameter.upper().is_some_and(|d| d <= d_max);
    let mut witness: Vec<usize> = members.iter().map(|&i| (start + i) % n).collect();
    witness.sort_unstable();
    Ok(IntervalEvent {
        holds,
        witness,
        diameter,
    })
}

/// One scale `k` of the interval schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleEntry {
    pub k: usize,
    /// `ceil(e^{beta^k})`.
    pub n_k: f64,
    /// `floor(N_k / N_{k-1})`.
    pub c_k: f64,
    pub delta_k: f64,
    pub eps_k: f64,
    #[serde(serialize_with = "serialize_biguint")]
    pub d_k: BigUint,
    pub p_k: f64,
}

fn serialize_biguint<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenormSchedule {
    pub alpha: f64,
    pub n: usize,
    pub p: f64,
    /// `alpha (3 - alpha) / 2`.
    pub beta: f64,
    /// `C(alpha, n)`.
    pub c: f64,
    /// Base scale: smallest `h` with `sum_{k>=h} C_k^{-0.2} <= 1/100`.
    pub h: usize,
    /// Top scale `floor(log_beta(ln n))`.
    pub m: usize,
    /// Root of `1 - sigma^{e^{beta^h}} = 1/50`.
    pub sigma: f64,
    /// Diameter growth exponent `log_beta 2`.
    pub eta: f64,
    pub entries: Vec<ScheduleEntry>,
}

/// Tail-sum target for the base scale.
pub const BASE_TAIL: f64 = 0.01;
/// Exponent applied to the per-scale block counts.
pub const BLOCK_EXPONENT: f64 = 0.2;

fn validate_schedule_args(alpha: f64, p: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::input(format!("alpha = {alpha}; the schedule needs 1 < alpha < 2")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::input(format!("p = {p}; need 0 <= p <= 1")));
    }
    Ok(())
}

/// Smallest `h >= 1` whose tail `sum_{k>=h} exp(-0.2 beta^{k-1} (beta-1))`
/// is at most 1/100. Terms below 1e-30 end the series.
pub fn base_scale(beta: f64) -> usize {
    let term = |k: usize| (-BLOCK_EXPONENT * beta.powi(k as i32 - 1) * (beta - 1.0)).exp();
    let mut terms = Vec::new();
    let mut k = 1;
    loop {
        let t = term(k);
        terms.push(t);
        if t < 1e-30 {
            break;
        }
        k += 1;
    }
    let mut tail = 0.0;
    let mut h = terms.len() + 1;
    for (i, t) in terms.iter().enumerate().rev() {
        tail += t;
        if tail > BASE_TAIL {
            break;
        }
        h = i + 1;
    }
    h
}

/// The interval schedule for scales `h..=m`; empty when `m < h`.
pub fn make_schedule(alpha: f64, n: usize, p: f64) -> Result<RenormSchedule> {
    validate_schedule_args(alpha, p)?;
    let beta = alpha * (3.0 - alpha) / 2.0;
    let m = ((n.max(3) as f64).ln().ln() / beta.ln()).floor().max(0.0) as usize;
    schedule_through(alpha, n, p, m)
}

/// Like [`make_schedule`] but with entries for every scale `h..=k_max`.
pub fn schedule_through(alpha: f64, n: usize, p: f64, k_max: usize) -> Result<RenormSchedule> {
    validate_schedule_args(alpha, p)?;
    let beta = alpha * (3.0 - alpha) / 2.0;
    let c = normalizing_constant(n, alpha)?;
    let h = base_scale(beta);
    let m = ((n.max(3) as f64).ln().ln() / beta.ln()).floor().max(0.0) as usize;
    let base_size = beta.powi(h as i32).exp();
    let sigma = (0.98f64.ln() * (-beta.powi(h as i32)).exp()).exp();
    let mut entries: Vec<ScheduleEntry> = Vec::new();
    let size = |k: usize| -> Result<f64> {
        let v = beta.powi(k as i32).exp().ceil();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::input(format!("interval size at scale {k} overflows f64 (alpha = {alpha})")))
        }
    };
    for k in h..=k_max {
        let n_k = size(k)?;
        let c_k = (n_k / size(k - 1)?).floor();
        let entry = match entries.last() {
            None => ScheduleEntry {
                k,
                n_k,
                c_k,
                delta_k: -(base_size * p.ln()).exp_m1(),
                eps_k: 0.0,
                d_k: BigUint::from_f64(n_k).expect("finite"),
                p_k: p,
            },
            Some(prev) => {
                let shrink = c_k.powf(-BLOCK_EXPONENT);
                ScheduleEntry {
                    k,
                    n_k,
                    c_k,
                    delta_k: 2.0 * shrink,
                    eps_k: prev.eps_k + prev.delta_k + shrink,
                    d_k: &prev.d_k * 2u32 + BigUint::one(),
                    p_k: c * (2.0 - alpha) * (alpha - 1.0) * 0.9
                        / ((1.0 - prev.eps_k).powi(2) * (2.0 * (2.0 - alpha) + 0.2)),
                }
            }
        };
        entries.push(entry);
    }
    Ok(RenormSchedule {
        alpha,
        n,
        p,
        beta,
        c,
        h,
        m,
        sigma,
        eta: 2f64.ln() / beta.ln(),
        entries,
    })
}

impl RenormSchedule {
    /// CSV with header `k,N_k,C_k,delta_k,eps_k,D_k,p_k`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,N_k,C_k,delta_k,eps_k,D_k,p_k")?;
        for e in &self.entries {
            writeln!(w, "{},{},{},{},{},{},{}", e.k, e.n_k, e.c_k, e.delta_k, e.eps_k, e.d_k, e.p_k)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ring_dist, PercolationGraph, SmallWorldGraph};

    fn perc(n: usize, ring: &[(usize, usize)], bridges: &[(usize, usize)]) -> PercolationGraph {
        let base = Arc::new(SmallWorldGraph::from_parts(n, 3.0, 0, bridges.iter().copied()).unwrap());
        PercolationGraph::from_parts(base, 0.5, ring.iter().copied(), bridges.iter().copied()).unwrap()
    }

    fn sampled(n: usize, alpha: f64, p: f64, seed: u64) -> PercolationGraph {
        let g = Arc::new(sample_small_world(n, alpha, &RngStream::new(seed, 0), SamplingMode::Fast).unwrap());
        percolate(&g, p, &RngStream::new(seed, 1)).unwrap()
    }

    #[test]
    fn identity_partition() {
        let gp = sampled(90, 1.5, 0.7, 3);
        let eg = build_ell_graph(&gp, 1, 0).unwrap();
        let mut ring: Vec<_> = gp.surviving_ring_edges().collect();
        ring.sort_unstable();
        assert_eq!(eg.super_edges(), &ring[..]);
        assert_eq!(eg.super_bridges(), gp.surviving_bridges());
    }

    #[test]
    fn empty_percolation_has_no_links() {
        let eg = build_ell_graph(&sampled(60, 1.5, 0.0, 1), 4, 0).unwrap();
        assert!(eg.super_edges().is_empty() && eg.super_bridges().is_empty());
    }

    #[test]
    fn hand_classified_links() {
        let gp = perc(12, &[(0, 1), (2, 3)], &[(5, 9)]);
        let eg = build_ell_graph(&gp, 3, 0).unwrap();
        assert_eq!(eg.supernodes(), 4);
        assert_eq!(eg.super_edges(), &[(0, 1)]);
        assert_eq!(eg.super_bridges(), &[(1, 3)]);
    }

    #[test]
    fn ell_range_checked() {
        let gp = sampled(30, 1.5, 0.5, 1);
        assert!(build_ell_graph(&gp, 0, 0).is_err());
        assert!(build_ell_graph(&gp, 11, 0).is_err());
        assert!(build_ell_graph(&gp, 10, 30).is_err());
        assert!(build_ell_graph(&gp, 10, 29).is_ok());
    }

    #[test]
    fn remainder_absorbed_by_last_interval() {
        let gp = sampled(50, 1.5, 0.5, 2);
        let eg = build_ell_graph(&gp, 7, 5).unwrap();
        assert_eq!(eg.supernodes(), 7);
        assert_eq!(eg.interval_len(6), 8);
        let total: usize = (0..7).map(|j| eg.interval_len(j)).sum();
        assert_eq!(total, 50);
        assert_eq!(eg.interval_of(5), 0);
        assert_eq!(eg.interval_of(4), 6);
        for j in 0..7 {
            assert!(eg.interval_nodes(j).all(|u| eg.interval_of(u) == j));
        }
    }

    #[test]
    fn edges_lift_to_links() {
        for seed in 0..50 {
            let gp = sampled(200, 2.5, 0.8, seed);
            let eg = build_ell_graph(&gp, 1 + seed as usize % 20, seed as usize % 200).unwrap();
            for u in 0..200 {
                for &v in gp.neighbors(u) {
                    let (a, b) = (eg.interval_of(u), eg.interval_of(v));
                    assert!(a == b || eg.has_link(a, b));
                }
            }
            assert!(eg.super_edges().iter().all(|&(a, b)| eg.ring_adjacent(a, b)));
            assert!(eg.super_bridges().iter().all(|&(a, b)| !eg.ring_adjacent(a, b)));
            assert_eq!(coarse_size_violations(&component_labels(&gp), &eg), 0);
        }
    }

    #[test]
    fn super_visit_examples() {
        let lonely = build_ell_graph(&perc(18, &[], &[]), 3, 0).unwrap();
        let v = super_component_of(&lonely, 2).unwrap();
        assert_eq!(v.visit_order, vec![2]);
        assert_eq!(v.iterations(), 1);

        let all: Vec<_> = (0..18).map(|i| (i, (i + 1) % 18)).collect();
        let full = build_ell_graph(&perc(18, &all, &[]), 3, 0).unwrap();
        assert_eq!(super_component_of(&full, 0).unwrap().visit_order.len(), 6);

        // Six super-nodes of 3 nodes each; (1, 10) joins S0 and S3, (8, 9) joins S2 and S3.
        let gp = perc(18, &[(8, 9)], &[(1, 10)]);
        let eg = build_ell_graph(&gp, 3, 0).unwrap();
        assert_eq!(eg.super_bridges(), &[(0, 3)]);
        let v = super_component_of(&eg, 0).unwrap();
        assert_eq!(v.visit_order, vec![0, 3, 2]);
        assert_eq!((v.x_counts[0], v.y_counts[0], v.y_left_counts[0]), (0, 1, 1));
        assert!(v.accounting_holds());
    }

    #[test]
    fn super_visit_accounting_on_samples() {
        for seed in 0..200 {
            let gp = sampled(600, 2.2 + (seed % 5) as f64 * 0.3, 0.3 + (seed % 7) as f64 * 0.1, seed);
            let eg = build_ell_graph(&gp, 2 + seed as usize % 9, 0).unwrap();
            let v = super_component_of(&eg, seed as usize % eg.supernodes()).unwrap();
            assert!(v.accounting_holds(), "seed {seed}");
            let labels = component_labels(&eg);
            let start = seed as usize % eg.supernodes();
            assert_eq!(v.visit_order.len(), labels.sizes[labels.label[start]]);
        }
    }

    #[test]
    fn bridge_tail_examples() {
        assert_eq!(bridge_length_tail(100, 3.0, 50).unwrap(), 0.0);
        assert_eq!(bridge_length_tail(101, 3.0, 60).unwrap(), 0.0);
        let q = distance_probabilities(20, 2.0).unwrap();
        let none: f64 = (2..=10).map(|d| (1.0 - q[d]).powi(if d == 10 { 1 } else { 2 })).product();
        assert!((bridge_length_tail(20, 2.0, 1).unwrap() - (1.0 - none)).abs() < 1e-14);
        // The exact value exceeds 1/x^(alpha-1) = 0.04 here.
        let t = bridge_length_tail(100, 3.0, 5).unwrap();
        assert!((t - 0.077_311_226_252_677_83).abs() < 1e-12, "{t}");
    }

    fn integral_tail_bound(n: usize, alpha: f64, x: usize) -> f64 {
        let c = normalizing_constant(n, alpha).unwrap();
        2.0 / ((alpha - 1.0) * c * (x as f64).powf(alpha - 1.0))
    }

    #[test]
    fn bridge_tail_below_integral_bound() {
        for &n in &[50usize, 999, 10_000] {
            for &alpha in &[2.5, 3.0, 4.0] {
                for x in 1..=n / 2 {
                    let t = bridge_length_tail(n, alpha, x).unwrap();
                    assert!(t <= integral_tail_bound(n, alpha, x) + 1e-15, "n={n} alpha={alpha} x={x}");
                }
            }
        }
    }

    #[test]
    fn bridge_tail_power_bound_fails_for_small_normalizer() {
        // 1/x^(alpha-1) needs (alpha-1) C >= 2, which no alpha > 2 satisfies.
        for &alpha in &[2.5, 3.0, 4.0] {
            assert!((alpha - 1.0) * normalizing_constant(10_000, alpha).unwrap() < 2.0);
            let x = 3;
            assert!(bridge_length_tail(10_000, alpha, x).unwrap() > (x as f64).powf(1.0 - alpha));
        }
    }

    #[test]
    fn isolation_rate_extremes() {
        let r = supernode_isolation_rate(120, 3.0, 1.0, 4, 200, &RngStream::new(5, 0)).unwrap();
        assert_eq!(r.rate_isolated, 0.0);
        assert_eq!(r.coarse_size_violations, 0);
        let r = supernode_isolation_rate(120, 3.0, 0.0, 4, 2000, &RngStream::new(5, 0)).unwrap();
        assert_eq!(r.rate_isolated, 1.0);
        assert!(r.isolated_bound_holds());
        assert!((r.isolated_lower_bound - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn isolation_rate_superbridge_bound() {
        let r = supernode_isolation_rate(480, 4.0, 0.5, 8, 20_000, &RngStream::new(8, 0)).unwrap();
        assert!((r.superbridge_upper_bound - 0.015625).abs() < 1e-15);
        assert!(r.superbridge_bound_holds(), "{r:?}");
        assert_eq!(r.coarse_size_violations, 0);
    }

    fn exact_isolation(n: usize, alpha: f64, p: f64, ell: usize) -> f64 {
        let q = distance_probabilities(n, alpha).unwrap();
        let log_none: f64 = (0..ell)
            .flat_map(|u| (ell..n).map(move |v| (u, v)))
            .map(|(u, v)| ring_dist(n, u, v))
            .filter(|&d| d >= 2)
            .map(|d| (-p * q[d]).ln_1p())
            .sum();
        (1.0 - p).powi(2) * log_none.exp()
    }

    #[test]
    fn isolation_rate_matches_exact_product() {
        // At alpha = 4 the exact isolation probability (~0.068) sits below the
        // (1-p)^2 e^{-2/(alpha-2)} ~ 0.092 lower bound.
        let exact = exact_isolation(480, 4.0, 0.5, 8);
        assert!(exact < 0.07);
        let r = supernode_isolation_rate(480, 4.0, 0.5, 8, 20_000, &RngStream::new(8, 0)).unwrap();
        assert!(!r.isolated_bound_holds());
        assert!((r.rate_isolated - exact).abs() <= 4.0 * binomial_sigma(exact, r.trials), "{r:?}");

        let exact = exact_isolation(480, 3.0, 0.5, 8);
        assert!(exact > 0.25 * (-2.0f64).exp());
        let r = supernode_isolation_rate(480, 3.0, 0.5, 8, 20_000, &RngStream::new(9, 0)).unwrap();
        assert!(r.isolated_bound_holds(), "{r:?}");
        assert!((r.rate_isolated - exact).abs() <= 4.0 * binomial_sigma(exact, r.trials), "{r:?}");
    }

    #[test]
    fn interval_event_examples() {
        let path: Vec<_> = (2..9).map(|i| (i, i + 1)).collect();
        let gp = perc(12, &path, &[]);
        let ev = interval_event_check(&gp, 2, 8, 0.0, 7).unwrap();
        assert!(ev.holds);
        assert_eq!(ev.witness, (2..10).collect::<Vec<_>>());
        assert!(!interval_event_check(&gp, 2, 8, 0.0, 6).unwrap().holds);

        let empty = perc(12, &[], &[]);
        let ev = interval_event_check(&empty, 0, 6, 0.8, 100).unwrap();
        assert!(!ev.holds);
        assert_eq!(ev.witness.len(), 1);
        assert!(interval_event_check(&empty, 0, 0, 0.5, 1).is_err());
    }

    #[test]
    fn interval_event_ignores_external_edges() {
        // 0-1 and 2-3 inside [0, 4), joined only via node 5 outside it.
        let gp = perc(12, &[(0, 1), (2, 3)], &[(1, 5), (3, 5)]);
        let ev = interval_event_check(&gp, 0, 4, 0.0, 10).unwrap();
        assert!(!ev.holds);
        assert_eq!(ev.witness, vec![0, 1]);
    }

    #[test]
    fn interval_event_whole_ring_matches_components() {
        use crate::analysis::connected_components;
        for seed in 0..100 {
            let n = 20 + seed as usize % 80;
            let gp = sampled(n, 1.3, 0.75, seed);
            let report = connected_components(&gp);
            let giant = report.components.iter().find(|c| c.len() == report.largest_size).unwrap();
            let d = report.largest_diameter.upper().unwrap();
            let eps = 1.0 - report.largest_size as f64 / n as f64;
            let ev = interval_event_check(&gp, 0, n, eps, d).unwrap();
            assert!(ev.holds, "seed {seed}");
            assert_eq!(&ev.witness, giant);
            assert_eq!(ev.diameter, report.largest_diameter);
            if d > 0 {
                assert!(!interval_event_check(&gp, 0, n, eps, d - 1).unwrap().holds);
            }
        }
    }

    #[test]
    fn schedule_beta_and_recurrences() {
        let s = schedule_through(1.5, 1_000_000, 1.0, 0).unwrap();
        assert_eq!(s.beta, 1.125);
        for i in 1..100 {
            let alpha = 1.0 + i as f64 / 100.0;
            let beta = alpha * (3.0 - alpha) / 2.0;
            assert!(beta > 1.0 && beta <= 1.125);
        }
        let s = schedule_through(1.5, 1_000_000, 1.0, base_scale(1.125) + 6).unwrap();
        let first = &s.entries[0];
        assert_eq!(first.d_k, BigUint::from_f64(first.n_k).unwrap());
        for w in s.entries.windows(2) {
            assert_eq!(w[1].d_k, &w[0].d_k * 2u32 + 1u32);
            assert!(w[1].eps_k >= w[0].eps_k);
            let shrink = w[1].c_k.powf(-0.2);
            assert_eq!(w[1].delta_k, 2.0 * shrink);
            assert_eq!(w[1].eps_k, w[0].eps_k + w[0].delta_k + shrink);
        }
        for e in &s.entries {
            let closed = (BigUint::one() << (e.k - s.h)) * (&first.d_k + 1u32) - 1u32;
            assert_eq!(e.d_k, closed);
        }
    }

    #[test]
    fn schedule_rejects_alpha_outside_window() {
        assert!(make_schedule(1.0, 1000, 0.9).is_err());
        assert!(make_schedule(2.0, 1000, 0.9).is_err());
        assert!(make_schedule(0.5, 1000, 0.9).is_err());
    }

    #[test]
    fn base_scale_is_minimal() {
        for &alpha in &[1.2, 1.5, 1.8] {
            let beta = alpha * (3.0 - alpha) / 2.0;
            let h = base_scale(beta);
            let tail = |from: usize| -> f64 {
                (from..from + 10_000).map(|k| (-0.2 * beta.powi(k as i32 - 1) * (beta - 1.0)).exp()).sum()
            };
            assert!(tail(h) <= 0.01);
            assert!(h == 1 || tail(h - 1) > 0.01);
        }
    }

    #[test]
    fn schedule_csv_header() {
        let s = schedule_through(1.5, 10_000, 1.0, base_scale(1.125) + 2).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,N_k,C_k,delta_k,eps_k,D_k,p_k"));
        assert_eq!(lines.count(), 3);
    }
}
