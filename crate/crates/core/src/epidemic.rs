//! Independent-cascade and Reed-Frost SIR spreading, their coupling to bond
//! percolation, and exact outbreak-size distributions for small graphs.
//!
//! Time runs in synchronous steps. At step `t` every node infectious at
//! `t - 1` makes one attempt on each neighbour that is still susceptible, then
//! recovers. A node reached by several attempts in one step is infected once.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::graph::{Adjacency, Graph};
use crate::model::PercolationGraph;
use crate::rng::RngStream;
use crate::{Error, Result};

/// Enumeration is exponential in the edge count; larger graphs are refused.
pub const ENUMERATION_EDGE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CascadeStep {
    pub susceptible: Vec<usize>,
    pub infectious: Vec<usize>,
    pub recovered: Vec<usize>,
}

/// States `t = 0 ..= stabilization_time`; the last has no infectious nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CascadeTrajectory {
    pub steps: Vec<CascadeStep>,
    pub stabilization_time: usize,
    pub total_infected: usize,
}

impl CascadeTrajectory {
    /// Infectious set at step `t`; empty past stabilization.
    pub fn infectious(&self, t: usize) -> &[usize] {
        self.steps.get(t).map_or(&[], |s| &s.infectious)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// Checks the partition, recovery and transmission rules on every step.
    pub fn is_consistent(&self, g: &impl Adjacency) -> bool {
        let n = g.node_count();
        let mut prev: Option<&CascadeStep> = None;
        for step in &self.steps {
            let mut seen = vec![false; n];
            for &u in step.susceptible.iter().chain(&step.infectious).chain(&step.recovered) {
                if u >= n || seen[u] {
                    return false;
                }
                seen[u] = true;
            }
            if seen.iter().any(|&s| !s) {
                return false;
            }
            if let Some(prev) = prev {
                let mut expected: Vec<usize> = prev.recovered.iter().chain(&prev.infectious).copied().collect();
                expected.sort_unstable();
                if expected != step.recovered {
                    return false;
                }
                let mut was_infectious = vec![false; n];
                prev.infectious.iter().for_each(|&u| was_infectious[u] = true);
                let reached = |v: usize| g.neighbors(v).iter().any(|&u| was_infectious[u]);
                if !step.infectious.iter().all(|&v| prev.susceptible.binary_search(&v).is_ok() && reached(v)) {
                    return false;
                }
            }
            prev = Some(step);
        }
        self.steps.last().is_some_and(|s| s.infectious.is_empty())
            && self.stabilization_time + 1 == self.steps.len()
            && self.total_infected == self.steps.last().map_or(0, |s| s.recovered.len())
    }
}

const SUSCEPTIBLE: u8 = 0;
const INFECTIOUS: u8 = 1;
const RECOVERED: u8 = 2;

fn seed_states(n: usize, seeds: &[usize]) -> Result<(Vec<u8>, Vec<usize>)> {
    if seeds.is_empty() {
        return Err(Error::input("initial infectious set is empty"));
    }
    let mut state = vec![SUSCEPTIBLE; n];
    for &s in seeds {
        if s >= n {
            return Err(Error::input(format!("node {s} out of range for n = {n}")));
        }
        state[s] = INFECTIOUS;
    }
    let frontier = (0..n).filter(|&u| state[u] == INFECTIOUS).collect();
    Ok((state, frontier))
}

fn snapshot(state: &[u8]) -> CascadeStep {
    let pick = |s: u8| (0..state.len()).filter(|&u| state[u] == s).collect();
    CascadeStep {
        susceptible: pick(SUSCEPTIBLE),
        infectious: pick(INFECTIOUS),
        recovered: pick(RECOVERED),
    }
}

/// Runs the synchronous SIR dynamics. `transmits(u, v, edge_id)` decides one
/// attempt; it is called for infectious `u` ascending, then neighbours `v`
/// ascending, and only while `v` is still susceptible.
fn spread(
    g: &Graph,
    seeds: &[usize],
    record: bool,
    mut transmits: impl FnMut(usize, usize, usize) -> bool,
) -> Result<(Vec<CascadeStep>, usize, usize)> {
    let (mut state, mut frontier) = seed_states(g.node_count(), seeds)?;
    let mut steps = Vec::new();
    let mut infected = frontier.len();
    let mut t = 0;
    loop {
        if record {
            steps.push(snapshot(&state));
        }
        if frontier.is_empty() {
            return Ok((steps, t, infected));
        }
        let mut next = Vec::new();
        for &u in &frontier {
            for (v, eid) in g.incident(u) {
                if state[v] == SUSCEPTIBLE && transmits(u, v, eid) {
                    state[v] = INFECTIOUS;
                    next.push(v);
                }
            }
        }
        for &u in &frontier {
            state[u] = RECOVERED;
        }
        next.sort_unstable();
        infected += next.len();
        frontier = next;
        t += 1;
    }
}

fn check_probs(g: &Graph, probs: &[f64]) -> Result<()> {
    if probs.len() != g.edge_count() {
        return Err(Error::input(format!(
            "{} edge probabilities for {} edges",
            probs.len(),
            g.edge_count()
        )));
    }
    if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
        return Err(Error::input(format!("edge {i} has probability {p}")));
    }
    Ok(())
}

/// Independent cascade with per-edge transmission probabilities, indexed by
/// edge id of `g`. One uniform is drawn per attempt, in attempt order.
pub fn independent_cascade(g: &Graph, edge_probs: &[f64], seeds: &[usize], rng: &mut impl Rng) -> Result<CascadeTrajectory> {
    check_probs(g, edge_probs)?;
    let (steps, stabilization_time, total_infected) =
        spread(g, seeds, true, |_, _, eid| rng.random::<f64>() < edge_probs[eid])?;
    Ok(CascadeTrajectory {
        steps,
        stabilization_time,
        total_infected,
    })
}

/// Independent cascade with the same probability on every edge.
pub fn reed_frost(g: &Graph, p: f64, seeds: &[usize], rng: &mut impl Rng) -> Result<CascadeTrajectory> {
    independent_cascade(g, &vec![p; g.edge_count()], seeds, rng)
}

/// Final size only, without recording the trajectory.
pub fn reed_frost_size(g: &Graph, p: f64, seeds: &[usize], rng: &mut impl Rng) -> Result<usize> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::input(format!("p = {p}; need 0 <= p <= 1")));
    }
    Ok(spread(g, seeds, false, |_, _, _| rng.random::<f64>() < p)?.2)
}

/// Empirical outbreak-size distribution over `runs` Reed-Frost runs; run `r`
/// uses stream `r` of `stream`'s seed. Entry `k` is the frequency of size `k`.
pub fn reed_frost_histogram(g: &Graph, p: f64, seeds: &[usize], runs: usize, stream: &RngStream) -> Result<Vec<f64>> {
    let n = g.node_count();
    let counts = (0..runs)
        .into_par_iter()
        .try_fold(
            || vec![0u64; n + 1],
            |mut acc, r| -> Result<Vec<u64>> {
                let mut rng = stream.with_stream(r as u64).rng();
                acc[reed_frost_size(g, p, seeds, &mut rng)?] += 1;
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u64; n + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(counts.into_iter().map(|c| c as f64 / runs.max(1) as f64).collect())
}

/// The shells `A_t` of nodes at distance exactly `t` from `A_0`, and their
/// union.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActiveSets {
    /// Non-empty shells, each ascending.
    pub levels: Vec<Vec<usize>>,
    /// Every node within finite distance of `A_0`, ascending.
    pub reached: Vec<usize>,
}

impl ActiveSets {
    pub fn level(&self, t: usize) -> &[usize] {
        self.levels.get(t).map_or(&[], |l| l)
    }
}

pub fn active_sets(gp: &impl Adjacency, seeds: &[usize]) -> Result<ActiveSets> {
    let n = gp.node_count();
    let (state, mut frontier) = seed_states(n, seeds)?;
    let mut seen: Vec<bool> = state.iter().map(|&s| s != SUSCEPTIBLE).collect();
    let mut levels = Vec::new();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in gp.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    next.push(v);
                }
            }
        }
        next.sort_unstable();
        levels.push(std::mem::replace(&mut frontier, next));
    }
    let reached = (0..n).filter(|&u| seen[u]).collect();
    Ok(ActiveSets { levels, reached })
}

/// The cascade in which `u` infects `v` exactly when `(u, v)` survived in
/// `gp`. Walks the unpercolated graph and asks `gp` about each edge.
pub fn coupled_cascade(gp: &PercolationGraph, seeds: &[usize]) -> Result<CascadeTrajectory> {
    let base = gp.base().to_graph();
    let (steps, stabilization_time, total_infected) = spread(&base, seeds, true, |u, v, _| gp.contains_edge(u, v))?;
    Ok(CascadeTrajectory {
        steps,
        stabilization_time,
        total_infected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnumerationMethod {
    /// Sum over every surviving edge subset.
    PercolationEnum,
    /// Sum over every outcome of the cascade's transmission attempts.
    CascadeEnum,
}

/// `probabilities[k]` is the probability that exactly `k` nodes are ever
/// infected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutbreakDistribution {
    pub probabilities: Vec<f64>,
}

impl OutbreakDistribution {
    pub fn total_variation(&self, other: &[f64]) -> f64 {
        let len = self.probabilities.len().max(other.len());
        let at = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
        0.5 * (0..len).map(|k| (at(&self.probabilities, k) - at(other, k)).abs()).sum::<f64>()
    }

    /// CSV `total_infected,probability`, one row per size with positive mass.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "total_infected,probability")?;
        for (k, &p) in self.probabilities.iter().enumerate() {
            if p > 0.0 {
                writeln!(w, "{k},{p}")?;
            }
        }
        Ok(())
    }
}

pub fn exact_outbreak_distribution(
    g: &Graph,
    p: f64,
    seeds: &[usize],
    method: EnumerationMethod,
) -> Result<OutbreakDistribution> {
    let m = g.edge_count();
    if m > ENUMERATION_EDGE_LIMIT {
        return Err(Error::TooLarge {
            edges: m,
            limit: ENUMERATION_EDGE_LIMIT,
        });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::input(format!("p = {p}; need 0 <= p <= 1")));
    }
    let n = g.node_count();
    let (state, frontier) = seed_states(n, seeds)?;
    let mut probabilities = vec![0.0; n + 1];
    match method {
        EnumerationMethod::PercolationEnum => {
            for mask in 0u32..(1 << m) {
                let kept = mask.count_ones() as i32;
                let weight = p.powi(kept) * (1.0 - p).powi(m as i32 - kept);
                if weight == 0.0 {
                    continue;
                }
                let (_, _, size) = spread(g, &frontier, false, |_, _, eid| mask >> eid & 1 == 1)?;
                probabilities[size] += weight;
            }
        }
        EnumerationMethod::CascadeEnum => {
            let recovered = frontier.len();
            enumerate_cascade(g, p, state, frontier, recovered, 1.0, &mut probabilities);
        }
    }
    Ok(OutbreakDistribution { probabilities })
}

/// Branches on every joint outcome of one step's attempts.
fn enumerate_cascade(g: &Graph, p: f64, mut state: Vec<u8>, frontier: Vec<usize>, infected: usize, weight: f64, out: &mut [f64]) {
    if frontier.is_empty() {
        out[infected] += weight;
        return;
    }
    let attempts: Vec<(usize, usize)> = frontier
        .iter()
        .flat_map(|&u| g.neighbors(u).iter().map(move |&v| (u, v)))
        .filter(|&(_, v)| state[v] == SUSCEPTIBLE)
        .collect();
    for &u in &frontier {
        state[u] = RECOVERED;
    }
    let k = attempts.len();
    for mask in 0u64..(1 << k) {
        let fired = mask.count_ones() as i32;
        let w = weight * p.powi(fired) * (1.0 - p).powi(k as i32 - fired);
        if w == 0.0 {
            continue;
        }
        let mut next_state = state.clone();
        let mut next = Vec::new();
        for (i, &(_, v)) in attempts.iter().enumerate() {
            if mask >> i & 1 == 1 && next_state[v] == SUSCEPTIBLE {
                next_state[v] = INFECTIOUS;
                next.push(v);
            }
        }
        next.sort_unstable();
        let grown = infected + next.len();
        enumerate_cascade(g, p, next_state, next, grown, w, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> Graph {
        Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn zero_probabilities_stop_at_once() {
        let g = triangle();
        let tr = reed_frost(&g, 0.0, &[0], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(tr.stabilization_time, 1);
        assert_eq!(tr.total_infected, 1);
        assert_eq!(tr.steps[1].recovered, vec![0]);
        assert!(tr.is_consistent(&g));
    }

    #[test]
    fn unit_probabilities_flood_by_distance() {
        let g = Graph::path(5);
        let tr = reed_frost(&g, 1.0, &[2], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(tr.infectious(0), &[2]);
        assert_eq!(tr.infectious(1), &[1, 3]);
        assert_eq!(tr.infectious(2), &[0, 4]);
        assert_eq!(tr.stabilization_time, 3);
        assert_eq!(tr.total_infected, 5);
        assert!(tr.is_consistent(&g));
    }

    #[test]
    fn simultaneous_infection_blocks_shared_edge() {
        // 1 and 2 are infected together by 0, so edge (1, 2) is never tried.
        let g = triangle();
        let mut calls = Vec::new();
        let (_, _, size) = spread(&g, &[0], false, |u, v, _| {
            calls.push((u, v));
            true
        })
        .unwrap();
        assert_eq!(size, 3);
        assert_eq!(calls, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn reed_frost_is_uniform_independent_cascade() {
        let g = Graph::new(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)]).unwrap();
        for seed in 0..50 {
            let a = reed_frost(&g, 0.6, &[0, 3], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = independent_cascade(&g, &[0.6; 7], &[3, 0], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.total_infected, reed_frost_size(&g, 0.6, &[0, 3], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap());
        }
    }

    #[test]
    fn input_checks() {
        let g = triangle();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(reed_frost(&g, 0.5, &[], &mut rng).is_err());
        assert!(reed_frost(&g, 0.5, &[3], &mut rng).is_err());
        assert!(independent_cascade(&g, &[0.5, 0.5], &[0], &mut rng).is_err());
        assert!(independent_cascade(&g, &[0.5, 1.5, 0.0], &[0], &mut rng).is_err());
        assert!(active_sets(&g, &[]).is_err());
    }

    #[test]
    fn active_set_examples() {
        let g = Graph::path(3);
        let a = active_sets(&g, &[0]).unwrap();
        assert_eq!(a.levels, vec![vec![0], vec![1], vec![2]]);
        let all = active_sets(&g, &[2, 0, 1]).unwrap();
        assert_eq!(all.levels, vec![vec![0, 1, 2]]);
        assert!(all.level(1).is_empty());
    }

    #[test]
    fn exact_small_tables() {
        let edge = Graph::new(2, [(0, 1)]).unwrap();
        for method in [EnumerationMethod::PercolationEnum, EnumerationMethod::CascadeEnum] {
            let d = exact_outbreak_distribution(&edge, 0.3, &[0], method).unwrap();
            assert!((d.probabilities[1] - 0.7).abs() < 1e-15 && (d.probabilities[2] - 0.3).abs() < 1e-15);
            let d = exact_outbreak_distribution(&Graph::path(3), 0.5, &[0], method).unwrap();
            assert_eq!(d.probabilities, vec![0.0, 0.5, 0.25, 0.25]);
        }
    }

    #[test]
    fn triangle_full_outbreak() {
        // Of the 8 edge outcomes, node 0 reaches both others in 4: two or three
        // edges kept. Pr = 3/8 + 1/8 = 1/2.
        let d = exact_outbreak_distribution(&triangle(), 0.5, &[0], EnumerationMethod::CascadeEnum).unwrap();
        assert!((d.probabilities[3] - 0.5).abs() < 1e-15);
        assert!((d.probabilities[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn enumeration_refuses_large_graphs() {
        let g = Graph::path(ENUMERATION_EDGE_LIMIT + 2);
        let err = exact_outbreak_distribution(&g, 0.5, &[0], EnumerationMethod::PercolationEnum).unwrap_err();
        assert!(matches!(err, Error::TooLarge { edges: 21, limit: 20 }));
    }

    #[test]
    fn csv_and_json_output() {
        let d = exact_outbreak_distribution(&Graph::path(3), 0.5, &[0], EnumerationMethod::PercolationEnum).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "total_infected,probability\n1,0.5\n2,0.25\n3,0.25\n");

        let tr = reed_frost(&Graph::path(2), 1.0, &[0], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut buf = Vec::new();
        tr.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["steps"][1]["infectious"], serde_json::json!([1]));
        assert_eq!(v["total_infected"], 2);
    }
}
