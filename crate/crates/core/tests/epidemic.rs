use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swperc::analysis::parallel_bfs;
use swperc::epidemic::{
    active_sets, coupled_cascade, exact_outbreak_distribution, reed_frost_histogram, EnumerationMethod,
};
use swperc::model::{percolate, sample_small_world};
use swperc::{Adjacency, Graph, RngStream, SamplingMode};

fn random_graph(rng: &mut ChaCha8Rng, max_edges: usize) -> Graph {
    let n = rng.random_range(2..=8);
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let m = rng.random_range(1..=max_edges.min(pairs.len()));
    for i in 0..m {
        let j = rng.random_range(i..pairs.len());
        pairs.swap(i, j);
    }
    pairs.truncate(m);
    Graph::new(n, pairs).unwrap()
}

#[test]
fn enumeration_methods_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let g = random_graph(&mut rng, 12);
        let p: f64 = rng.random();
        let seeds = [rng.random_range(0..g.node_count())];
        let a = exact_outbreak_distribution(&g, p, &seeds, EnumerationMethod::PercolationEnum).unwrap();
        let b = exact_outbreak_distribution(&g, p, &seeds, EnumerationMethod::CascadeEnum).unwrap();
        for (x, y) in a.probabilities.iter().zip(&b.probabilities) {
            assert!((x - y).abs() <= 1e-12, "{a:?} vs {b:?}");
        }
        assert!((a.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn triangle_monte_carlo_matches_enumeration() {
    let g = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
    let exact = exact_outbreak_distribution(&g, 0.5, &[0], EnumerationMethod::PercolationEnum).unwrap();
    let hist = reed_frost_histogram(&g, 0.5, &[0], 1_000_000, &RngStream::new(77, 0)).unwrap();
    assert!((hist[3] - exact.probabilities[3]).abs() < 0.005, "{}", hist[3]);
    assert!(exact.total_variation(&hist) < 0.01);
}

#[test]
fn coupling_matches_active_sets_on_samples() {
    for t in 0..300u64 {
        let stream = RngStream::new(31, t);
        let mut rng = stream.rng();
        let n = rng.random_range(5..=200);
        let alpha = rng.random_range(0.2..3.5);
        let p = rng.random_range(0.0..=1.0);
        let g = Arc::new(sample_small_world(n, alpha, &stream.derive(1), SamplingMode::Fast).unwrap());
        let gp = percolate(&g, p, &stream.derive(2)).unwrap();
        let seeds: Vec<usize> = (0..rng.random_range(1..4)).map(|_| rng.random_range(0..n)).collect();
        let cascade = coupled_cascade(&gp, &seeds).unwrap();
        let active = active_sets(&gp, &seeds).unwrap();
        assert!(cascade.is_consistent(&g.to_graph()));
        for t in 0..=cascade.stabilization_time {
            assert_eq!(cascade.infectious(t), active.level(t));
        }
        assert_eq!(cascade.steps.last().unwrap().recovered, active.reached);

        let mut initiators = seeds.clone();
        initiators.sort_unstable();
        initiators.dedup();
        let trace = parallel_bfs(&gp, &initiators, &[], None).unwrap();
        assert_eq!(trace.rounds, active.levels.len());
        let mut reached = trace.reached();
        reached.sort_unstable();
        assert_eq!(reached, active.reached);
    }
}

proptest! {
    #[test]
    fn trajectories_partition_nodes(seed: u64, p in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 20);
        let tr = swperc::epidemic::reed_frost(&g, p, &[0], &mut rng).unwrap();
        prop_assert!(tr.is_consistent(&g));
        for w in tr.steps.windows(2) {
            prop_assert!(w[1].recovered.len() >= w[0].recovered.len());
            prop_assert!(w[1].susceptible.len() <= w[0].susceptible.len());
        }
    }
}
