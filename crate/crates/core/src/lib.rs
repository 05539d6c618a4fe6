//! Bond percolation, independent-cascade epidemics and branching-process
//! oracles on one-dimensional power-law small-world rings.
//!
//! A graph is a ring `0..n` plus random long-range "bridges"; a bridge between
//! nodes at ring distance `d >= 2` is present with probability proportional to
//! `d^-alpha`. Percolation keeps every edge (ring or bridge) independently with
//! probability `p`. The modules below sample such graphs, measure them, and run
//! the experiments that expose the three regimes `alpha < 1`, `1 < alpha < 2`
//! and `alpha > 2`.

pub mod analysis;
pub mod branching;
pub mod edgelist;
pub mod epidemic;
mod error;
pub mod graph;
pub mod harness;
pub mod model;
pub mod renorm;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{Adjacency, Graph};
pub use model::{PercolationGraph, SamplingMode, SmallWorldGraph};
pub use rng::RngStream;
