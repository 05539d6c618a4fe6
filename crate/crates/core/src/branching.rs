//! Galton-Watson branching processes in exploration form: one individual is
//! processed per step, so the population obeys `B_t = B_{t-1} + W_t - 1`
//! with `B_0 = 1`, and the process dies at the first `t` with `B_t = 0`.

use std::fmt;
use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::BfsTrace;
use crate::rng::RngStream;
use crate::{Error, Result};

/// Offspring law of one individual.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Offspring {
    Constant(u64),
    Bernoulli(f64),
    Binomial { trials: u64, p: f64 },
    Poisson(f64),
    /// Uniform draw from observed counts.
    Empirical(Vec<u64>),
}

impl Offspring {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let ok = match self {
            Offspring::Constant(_) => true,
            Offspring::Bernoulli(p) | Offspring::Binomial { p, .. } => prob(*p),
            Offspring::Poisson(mean) => mean.is_finite() && *mean >= 0.0,
            Offspring::Empirical(v) => !v.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("invalid offspring law {self}")))
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        match self {
            Offspring::Constant(k) => *k,
            Offspring::Bernoulli(p) => u64::from(rng.random::<f64>() < *p),
            Offspring::Binomial { trials, p } => Binomial::new(*trials, *p).expect("validated").sample(rng),
            Offspring::Poisson(mean) if *mean == 0.0 => 0,
            Offspring::Poisson(mean) => Poisson::new(*mean).expect("validated").sample(rng) as u64,
            Offspring::Empirical(v) => v[rng.random_range(0..v.len())],
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Offspring::Constant(k) => *k as f64,
            Offspring::Bernoulli(p) => *p,
            Offspring::Binomial { trials, p } => *trials as f64 * p,
            Offspring::Poisson(mean) => *mean,
            Offspring::Empirical(v) => v.iter().sum::<u64>() as f64 / v.len() as f64,
        }
    }

    /// `Pr(W <= k)`.
    pub fn cdf(&self, k: u64) -> f64 {
        use law_cdf::{binomial_cdf, poisson_cdf};
        match self {
            Offspring::Constant(c) => f64::from(u8::from(k >= *c)),
            Offspring::Bernoulli(p) => {
                if k >= 1 {
                    1.0
                } else {
                    1.0 - p
                }
            }
            Offspring::Binomial { trials, p } => binomial_cdf(*trials, *p, k),
            Offspring::Poisson(mean) => poisson_cdf(*mean, k),
            Offspring::Empirical(v) => v.iter().filter(|&&x| x <= k).count() as f64 / v.len() as f64,
        }
    }
}

impl fmt::Display for Offspring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Offspring::Constant(k) => write!(f, "constant({k})"),
            Offspring::Bernoulli(p) => write!(f, "bernoulli({p})"),
            Offspring::Binomial { trials, p } => write!(f, "binomial({trials};{p})"),
            Offspring::Poisson(mean) => write!(f, "poisson({mean})"),
            Offspring::Empirical(v) => write!(f, "empirical({} samples)", v.len()),
        }
    }
}

impl std::str::FromStr for Offspring {
    type Err = Error;

    /// Accepts the display forms, with `empirical(a;b;...)` listing the counts.
    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::input(format!("unrecognised offspring law `{text}`"));
        let (name, rest) = text.trim().split_once('(').ok_or_else(bad)?;
        let args: Vec<&str> = rest.strip_suffix(')').ok_or_else(bad)?.split(';').map(str::trim).collect();
        let float = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad());
        let law = match (name.trim(), args.as_slice()) {
            ("constant", [k]) => Offspring::Constant(int(k)?),
            ("bernoulli", [p]) => Offspring::Bernoulli(float(p)?),
            ("binomial", [t, p]) => Offspring::Binomial {
                trials: int(t)?,
                p: float(p)?,
            },
            ("poisson", [m]) => Offspring::Poisson(float(m)?),
            ("empirical", counts) => Offspring::Empirical(counts.iter().map(|c| int(c)).collect::<Result<_>>()?),
            _ => return Err(bad()),
        };
        law.validate()?;
        Ok(law)
    }
}

/// Term-by-term CDFs; binomial terms go through logs so large `trials` stay
/// finite.
mod law_cdf {
    pub fn binomial_cdf(trials: u64, p: f64, k: u64) -> f64 {
        if k >= trials || p == 0.0 {
            return 1.0;
        }
        if p == 1.0 {
            return 0.0;
        }
        let (lp, lq) = (p.ln(), (-p).ln_1p());
        let mut ln_c = 0.0;
        let mut total = 0.0;
        for i in 0..=k {
            if i > 0 {
                ln_c += ((trials - i + 1) as f64).ln() - (i as f64).ln();
            }
            total += (ln_c + i as f64 * lp + (trials - i) as f64 * lq).exp();
        }
        total.min(1.0)
    }

    pub fn poisson_cdf(mean: f64, k: u64) -> f64 {
        if mean == 0.0 {
            return 1.0;
        }
        let mut term = (-mean).exp();
        let mut total = term;
        for i in 1..=k {
            term *= mean / i as f64;
            total += term;
        }
        total.min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GwTrajectory {
    /// `B_0 = 1, B_1, ...` up to extinction or the budget.
    pub sizes: Vec<u64>,
    /// `W_1, W_2, ...`.
    pub offspring: Vec<u64>,
    /// First `t > 0` with `B_t = 0`; `None` if the budget ran out first.
    pub extinction: Option<usize>,
}

impl GwTrajectory {
    /// `B_T = 1 + sum_{t<=T} W_t - T` on every prefix.
    pub fn accounting_holds(&self) -> bool {
        let mut total: i128 = 1;
        self.sizes.iter().skip(1).zip(&self.offspring).all(|(&b, &w)| {
            total += w as i128 - 1;
            total == b as i128
        })
    }
}

/// Runs at most `budget` steps.
pub fn galton_watson(offspring: &Offspring, budget: usize, rng: &mut impl Rng) -> Result<GwTrajectory> {
    offspring.validate()?;
    if budget == 0 {
        return Err(Error::input("budget must be at least 1"));
    }
    let mut sizes = vec![1u64];
    let mut draws = Vec::new();
    let mut b = 1u64;
    for t in 1..=budget {
        let w = offspring.sample(rng);
        b = b + w - 1;
        sizes.push(b);
        draws.push(w);
        if b == 0 {
            return Ok(GwTrajectory {
                sizes,
                offspring: draws,
                extinction: Some(t),
            });
        }
    }
    Ok(GwTrajectory {
        sizes,
        offspring: draws,
        extinction: None,
    })
}

/// Whether a run dies within `budget` steps. Once `B_t > budget - t` the
/// process cannot reach 0 in time, so the run stops early.
fn dies_within(offspring: &Offspring, budget: usize, rng: &mut impl Rng) -> bool {
    let mut b = 1u64;
    for t in 1..=budget {
        b = b + offspring.sample(rng) - 1;
        if b == 0 {
            return true;
        }
        if b > (budget - t) as u64 {
            return false;
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionReport {
    pub offspring: String,
    pub budget: usize,
    pub trials: usize,
    pub extinct: usize,
    /// Alive at the budget; never counted as extinct.
    pub surviving: usize,
    pub rate: f64,
    /// 95% Wilson interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ExtinctionReport {
    pub const CSV_HEADER: &'static str = "offspring,budget,trials,extinct,surviving,rate,ci_low,ci_high";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.offspring, self.budget, self.trials, self.extinct, self.surviving, self.rate, self.ci_low, self.ci_high
        )
    }

    pub fn write_csv<W: Write>(reports: &[ExtinctionReport], mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in reports {
            writeln!(w, "{}", r.csv_row())?;
        }
        Ok(())
    }
}

fn wilson(successes: usize, trials: usize) -> (f64, f64) {
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let phat = successes as f64 / n;
    let denom = 1.0 + Z * Z / n;
    let centre = (phat + Z * Z / (2.0 * n)) / denom;
    let half = Z * (phat * (1.0 - phat) / n + Z * Z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Fraction of `trials` runs extinct within `budget` steps. Trial `i` uses
/// stream `i` of `stream`'s seed.
pub fn extinction_rate(offspring: &Offspring, budget: usize, trials: usize, stream: &RngStream) -> Result<ExtinctionReport> {
    offspring.validate()?;
    if budget == 0 || trials == 0 {
        return Err(Error::input("budget and trials must be at least 1"));
    }
    let extinct = (0..trials)
        .into_par_iter()
        .filter(|&i| dies_within(offspring, budget, &mut stream.with_stream(i as u64).rng()))
        .count();
    let (ci_low, ci_high) = wilson(extinct, trials);
    Ok(ExtinctionReport {
        offspring: offspring.to_string(),
        budget,
        trials,
        extinct,
        surviving: trials - extinct,
        rate: extinct as f64 / trials as f64,
        ci_low,
        ci_high,
    })
}

/// Smallest `q` in `[0, 1]` with `q = E[q^W]`, by iterating from 0.
pub fn extinction_fixed_point(offspring: &Offspring) -> Result<f64> {
    offspring.validate()?;
    let pgf = |q: f64| -> f64 {
        match offspring {
            Offspring::Constant(k) => q.powi(*k as i32),
            Offspring::Bernoulli(p) => 1.0 - p + p * q,
            Offspring::Binomial { trials, p } => (1.0 - p + p * q).powf(*trials as f64),
            Offspring::Poisson(mean) => (mean * (q - 1.0)).exp(),
            Offspring::Empirical(v) => v.iter().map(|&w| q.powi(w as i32)).sum::<f64>() / v.len() as f64,
        }
    };
    let mut q = 0.0;
    for _ in 0..1_000_000 {
        let next = pgf(q);
        if (next - q).abs() < 1e-15 {
            return Ok(next);
        }
        q = next;
    }
    Ok(q)
}

/// Per-iteration additions `W_t` pooled over traces.
pub fn added_counts<'a>(traces: impl IntoIterator<Item = &'a BfsTrace>) -> Vec<u64> {
    traces.into_iter().flat_map(|t| t.added.iter().map(|&w| w as u64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub observed: usize,
    pub bound_samples: usize,
    /// Sum of the two DKW half-widths at the requested confidence.
    pub band: f64,
    /// `(k, observed CDF, bound CDF)` for `k = 0 ..= max value seen`.
    pub points: Vec<(u64, f64, f64)>,
    /// Largest `F_bound(k) - F_observed(k)`; positive means the bound is
    /// smaller at some `k`.
    pub max_violation: f64,
    pub holds: bool,
}

/// Empirical check that the observed counts are stochastically dominated by
/// the bound law: `F_observed(k) >= F_bound(k)` at every integer `k`, up to a
/// DKW band covering both empirical CDFs with joint confidence
/// `1 - 2 * (1 - confidence)`.
pub fn dominate_check(
    observed: &[u64],
    bound: &Offspring,
    samples: usize,
    confidence: f64,
    stream: &RngStream,
) -> Result<DominanceReport> {
    bound.validate()?;
    if observed.is_empty() || samples == 0 {
        return Err(Error::input("need observed values and at least one bound sample"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::input(format!("confidence = {confidence}; need 0 < c < 1")));
    }
    let mut rng = stream.rng();
    let mut drawn: Vec<u64> = (0..samples).map(|_| bound.sample(&mut rng)).collect();
    drawn.sort_unstable();
    let mut seen = observed.to_vec();
    seen.sort_unstable();
    let dkw = |m: usize| ((2.0 / (1.0 - confidence)).ln() / (2.0 * m as f64)).sqrt();
    let band = dkw(seen.len()) + dkw(drawn.len());
    let ecdf = |v: &[u64], k: u64| v.partition_point(|&x| x <= k) as f64 / v.len() as f64;
    let top = seen.last().copied().unwrap_or(0).max(drawn.last().copied().unwrap_or(0));
    let points: Vec<(u64, f64, f64)> = (0..=top).map(|k| (k, ecdf(&seen, k), ecdf(&drawn, k))).collect();
    let max_violation = points.iter().map(|&(_, o, b)| b - o).fold(f64::NEG_INFINITY, f64::max);
    Ok(DominanceReport {
        observed: seen.len(),
        bound_samples: drawn.len(),
        band,
        holds: max_violation <= band,
        max_violation,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn offspring_parses_display_forms() {
        for law in [
            Offspring::Constant(3),
            Offspring::Bernoulli(0.25),
            Offspring::Binomial { trials: 12, p: 0.1 },
            Offspring::Poisson(2.0),
        ] {
            assert_eq!(law.to_string().parse::<Offspring>().unwrap(), law);
        }
        assert_eq!("empirical(0; 2;1)".parse::<Offspring>().unwrap(), Offspring::Empirical(vec![0, 2, 1]));
        for bad in ["poisson", "poisson(-1)", "binomial(3)", "gamma(2)", "bernoulli(1.5)"] {
            assert!(bad.parse::<Offspring>().is_err(), "{bad}");
        }
    }

    #[test]
    fn deterministic_laws() {
        let none = galton_watson(&Offspring::Constant(0), 10, &mut rng()).unwrap();
        assert_eq!(none.extinction, Some(1));
        assert_eq!(none.sizes, vec![1, 0]);

        let one = galton_watson(&Offspring::Constant(1), 50, &mut rng()).unwrap();
        assert_eq!(one.extinction, None);
        assert!(one.sizes.iter().all(|&b| b == 1));
        assert_eq!(one.sizes.len(), 51);

        let two = galton_watson(&Offspring::Constant(2), 20, &mut rng()).unwrap();
        assert_eq!(two.sizes, (1..=21).collect::<Vec<u64>>());
        assert!(two.accounting_holds());
    }

    #[test]
    fn trajectories_obey_accounting() {
        for seed in 0..200 {
            let tr = galton_watson(&Offspring::Poisson(1.1), 500, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert!(tr.accounting_holds());
            if let Some(t) = tr.extinction {
                assert_eq!(tr.sizes[t], 0);
                assert!(tr.sizes[1..t].iter().all(|&b| b > 0));
            }
        }
    }

    #[test]
    fn zero_offspring_always_dies() {
        let r = extinction_rate(&Offspring::Constant(0), 5, 100, &RngStream::new(1, 0)).unwrap();
        assert_eq!(r.rate, 1.0);
        assert_eq!(r.surviving, 0);
        let r = extinction_rate(&Offspring::Constant(1), 5, 100, &RngStream::new(1, 0)).unwrap();
        assert_eq!((r.extinct, r.surviving), (0, 100));
    }

    #[test]
    fn early_exit_agrees_with_full_run() {
        let law = Offspring::Poisson(1.3);
        for i in 0..300 {
            let s = RngStream::new(9, i);
            let full = galton_watson(&law, 60, &mut s.rng()).unwrap();
            assert_eq!(dies_within(&law, 60, &mut s.rng()), full.extinction.is_some());
        }
    }

    #[test]
    fn fixed_point_oracle() {
        let q = extinction_fixed_point(&Offspring::Poisson(2.0)).unwrap();
        assert!((q - (2.0 * (q - 1.0)).exp()).abs() < 1e-12);
        assert!((q - 0.203_187_869_979_979).abs() < 1e-9, "{q}");
        assert!((extinction_fixed_point(&Offspring::Bernoulli(0.9)).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cdfs_match_definitions() {
        let b = Offspring::Binomial { trials: 5, p: 0.3 };
        let pmf = |k: u64| {
            let c = (1..=k).fold(1.0, |a, i| a * (5 - k + i) as f64 / i as f64);
            c * 0.3f64.powi(k as i32) * 0.7f64.powi(5 - k as i32)
        };
        let mut acc = 0.0;
        for k in 0..=5 {
            acc += pmf(k);
            assert!((b.cdf(k) - acc).abs() < 1e-12);
        }
        assert!((Offspring::Poisson(2.0).cdf(1) - 3.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(Offspring::Bernoulli(0.25).cdf(0), 0.75);
        assert_eq!(Offspring::Empirical(vec![0, 1, 1, 3]).cdf(1), 0.75);
        let big = Offspring::Binomial { trials: 10_002, p: 0.9 / 10_002.0 };
        assert!((big.cdf(0) - (-0.9f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn validation() {
        assert!(Offspring::Bernoulli(1.5).validate().is_err());
        assert!(Offspring::Poisson(-1.0).validate().is_err());
        assert!(Offspring::Empirical(vec![]).validate().is_err());
        assert!(galton_watson(&Offspring::Constant(1), 0, &mut rng()).is_err());
    }

    #[test]
    fn dominance_examples() {
        let s = RngStream::new(4, 0);
        let zeros = vec![0u64; 1000];
        let r = dominate_check(&zeros, &Offspring::Bernoulli(0.5), 10_000, 0.99, &s).unwrap();
        assert!(r.holds);
        assert!(r.max_violation <= 0.0);
        assert!((r.points[0].2 - 0.5).abs() < 0.02);

        let mut rng = rng();
        let observed: Vec<u64> = (0..5000).map(|_| Offspring::Poisson(1.0).sample(&mut rng)).collect();
        let r = dominate_check(&observed, &Offspring::Empirical(observed.clone()), 20_000, 0.99, &s).unwrap();
        assert!(r.holds, "{r:?}");

        let r = dominate_check(&observed, &Offspring::Constant(0), 100, 0.99, &s).unwrap();
        assert!(!r.holds);
    }

    #[test]
    fn csv_row_layout() {
        let r = extinction_rate(&Offspring::Constant(0), 3, 10, &RngStream::new(1, 0)).unwrap();
        let mut buf = Vec::new();
        ExtinctionReport::write_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("offspring,budget,trials,extinct,surviving,rate,ci_low,ci_high\nconstant(0),3,10,10,0,1,"));
    }
}
