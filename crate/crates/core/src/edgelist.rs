//! Text edge lists.
//!
//! ```text
//! # sw n=8 alpha=2 seed=7
//! # percolation p=0.5 seed=9      (percolated graphs only)
//! 0 1 R
//! 0 4 B
//! ```
//!
//! One edge per line as `u v kind`, kind `R` (ring) or `B` (bridge), endpoints
//! written `min max`. Ring edges come first in ring order, then bridges sorted.
//! Floats use Rust's shortest round-trip formatting, so reading a file back
//! reproduces the same values bit for bit.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::model::{PercolationGraph, SmallWorldGraph};
use crate::{Error, Result};

/// Contents of an edge-list file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeList {
    pub n: usize,
    pub alpha: f64,
    pub seed: u64,
    /// `(p, seed)` when the file holds a percolated graph.
    pub percolation: Option<(f64, u64)>,
    pub ring: Vec<(usize, usize)>,
    pub bridges: Vec<(usize, usize)>,
}

impl EdgeList {
    pub fn from_small_world(g: &SmallWorldGraph) -> Self {
        Self {
            n: g.n(),
            alpha: g.alpha(),
            seed: g.seed(),
            percolation: None,
            ring: g.ring_edges().collect(),
            bridges: g.bridges().to_vec(),
        }
    }

    pub fn from_percolation(gp: &PercolationGraph, percolation_seed: u64) -> Self {
        let base = gp.base();
        Self {
            n: base.n(),
            alpha: base.alpha(),
            seed: base.seed(),
            percolation: Some((gp.p(), percolation_seed)),
            ring: gp.surviving_ring_edges().collect(),
            bridges: gp.surviving_bridges().to_vec(),
        }
    }

    /// The unpercolated graph. Ring edges are implicit, so only the bridge
    /// lines matter.
    pub fn to_small_world(&self) -> Result<SmallWorldGraph> {
        SmallWorldGraph::from_parts(self.n, self.alpha, self.seed, self.bridges.iter().copied())
    }

    /// The stored edges as a percolation graph. The base graph is rebuilt from
    /// the listed bridges; an unpercolated file yields `p = 1`.
    pub fn to_percolation(&self) -> Result<PercolationGraph> {
        let base = Arc::new(self.to_small_world()?);
        let p = self.percolation.map_or(1.0, |(p, _)| p);
        PercolationGraph::from_parts(base, p, self.ring.iter().copied(), self.bridges.iter().copied())
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# sw n={} alpha={} seed={}", self.n, self.alpha, self.seed)?;
        if let Some((p, seed)) = self.percolation {
            writeln!(w, "# percolation p={p} seed={seed}")?;
        }
        for &(u, v) in &self.ring {
            writeln!(w, "{} {} R", u.min(v), u.max(v))?;
        }
        for &(u, v) in &self.bridges {
            writeln!(w, "{} {} B", u.min(v), u.max(v))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut header: Option<(usize, f64, u64)> = None;
        let mut percolation = None;
        let mut ring = Vec::new();
        let mut bridges = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut words = rest.split_whitespace();
                match words.next() {
                    Some("sw") => {
                        let kv = KeyValues::parse(words, lineno)?;
                        header = Some((kv.get("n")?, kv.get("alpha")?, kv.get("seed")?));
                    }
                    Some("percolation") => {
                        let kv = KeyValues::parse(words, lineno)?;
                        percolation = Some((kv.get("p")?, kv.get("seed")?));
                    }
                    _ => {}
                }
                continue;
            }
            if header.is_none() {
                return Err(parse_err(lineno, "edge before the '# sw' header"));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [u, v, kind] = fields[..] else {
                return Err(parse_err(lineno, "expected 'u v kind'"));
            };
            let u: usize = u.parse().map_err(|_| parse_err(lineno, "bad node id"))?;
            let v: usize = v.parse().map_err(|_| parse_err(lineno, "bad node id"))?;
            let edge = (u.min(v), u.max(v));
            match kind {
                "R" => ring.push(edge),
                "B" => bridges.push(edge),
                other => return Err(parse_err(lineno, &format!("unknown edge kind '{other}'"))),
            }
        }
        let (n, alpha, seed) = header.ok_or_else(|| parse_err(0, "missing '# sw' header"))?;
        Ok(Self {
            n,
            alpha,
            seed,
            percolation,
            ring,
            bridges,
        })
    }
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

struct KeyValues<'a> {
    line: usize,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> KeyValues<'a> {
    fn parse(words: impl Iterator<Item = &'a str>, line: usize) -> Result<Self> {
        let pairs = words
            .map(|w| w.split_once('=').ok_or_else(|| parse_err(line, &format!("expected key=value, got '{w}'"))))
            .collect::<Result<_>>()?;
        Ok(Self { line, pairs })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| parse_err(self.line, &format!("missing '{key}='")))?;
        raw.parse()
            .map_err(|_| parse_err(self.line, &format!("bad value for '{key}': '{raw}'")))
    }
}
