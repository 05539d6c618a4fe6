//! Parameter sweeps over `(n, alpha, p)` cells, their record files, and the
//! per-regime verdicts computed from those records.
//!
//! A sweep directory holds one CSV per cell under `cells/`, written atomically
//! once the whole cell is done, so an interrupted sweep resumes by skipping
//! finished cells. `records.csv` concatenates every cell in canonical order.
//! Wall-clock timings go to `timings.csv` and the per-cell `*.timings.csv`
//! files, keeping the record files byte-identical across runs.

use std::cmp::Ordering;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{component_labels, diameter, max_degree, restart_search, ring_spreads, RestartParams, RestartTrigger};
use crate::model::{percolate, sample_small_world, MIN_NODES};
use crate::renorm::{build_ell_graph, coarse_size_violations};
use crate::rng::RngStream;
use crate::{Error, Result, SamplingMode};

const GRAPH_STAGE: u64 = 1;
const PERCOLATION_STAGE: u64 = 2;

/// Constants the theory leaves symbolic, with calibrated defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Base of every `log n` below.
    pub log_base: f64,
    /// Max degree bound `mult * log n + add`.
    pub max_degree_mult: f64,
    pub max_degree_add: f64,
    /// Fraction of trials that must meet the degree bound.
    pub max_degree_trial_fraction: f64,
    /// Sequential iterations per restart attempt, as a multiple of `log n`.
    pub restart_tau_multiplier: f64,
    /// Queue trigger, as a multiple of `log n`.
    pub restart_beta_log: f64,
    /// Reach trigger `n / k`.
    pub restart_k_frac: f64,
    /// Attempts allowed, as a multiple of `log n` (rounded up).
    pub restart_budget: f64,
    pub restart_trial_fraction: f64,
    /// Cells with `p` below this are held to the subcritical criteria.
    pub subcritical_p: f64,
    pub subcritical_component_mult: f64,
    pub subcritical_trial_fraction: f64,
    /// Largest allowed ratio of median largest components between
    /// consecutive `n`.
    pub subcritical_growth_ratio: f64,
    pub sparse_fraction_max: f64,
    /// Median largest component bound `mult * log n` for `alpha > 2`.
    pub sparse_component_mult: f64,
    pub sparse_log_fit_r2: f64,
    pub confinement_sigmas: f64,
    /// Cells with `p` at or above this are expected to have a giant component
    /// when `alpha < 2`.
    pub giant_p_min: f64,
    pub giant_fraction_min: f64,
    pub giant_trial_fraction: f64,
    /// Diameter bound `mult * (log n)^exponent` for `1 < alpha < 2`.
    pub small_world_diameter_mult: f64,
    pub small_world_diameter_exponent: f64,
    /// Fitted exponent of diameter against `log n` must stay below this.
    pub small_world_max_fitted_exponent: f64,
    /// Diameter bound `mult * log n` for `alpha < 1`.
    pub long_range_diameter_mult: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            log_base: std::f64::consts::E,
            max_degree_mult: 4.0,
            max_degree_add: 2.0,
            max_degree_trial_fraction: 0.999,
            restart_tau_multiplier: 2.0,
            restart_beta_log: 2.0,
            restart_k_frac: 4.0,
            restart_budget: 1.0,
            restart_trial_fraction: 0.95,
            subcritical_p: 1.0 / 3.0,
            subcritical_component_mult: 60.0,
            subcritical_trial_fraction: 0.98,
            subcritical_growth_ratio: 1.5,
            sparse_fraction_max: 0.01,
            sparse_component_mult: 100.0,
            sparse_log_fit_r2: 0.8,
            confinement_sigmas: 3.0,
            giant_p_min: 0.9,
            giant_fraction_min: 0.2,
            giant_trial_fraction: 0.95,
            small_world_diameter_mult: 5.0,
            small_world_diameter_exponent: 2.0,
            small_world_max_fitted_exponent: 3.0,
            long_range_diameter_mult: 10.0,
        }
    }
}

impl Thresholds {
    pub fn log(&self, n: usize) -> f64 {
        (n as f64).ln() / self.log_base.ln()
    }

    pub fn restart_params(&self, n: usize) -> RestartParams {
        // restart_search works in natural logs; rescale to the configured base.
        let to_ln = 1.0 / self.log_base.ln();
        RestartParams {
            tau_multiplier: self.restart_tau_multiplier * to_ln,
            beta_log: self.restart_beta_log * to_ln,
            k_frac: self.restart_k_frac,
            max_restarts: Some((self.restart_budget * self.log(n)).ceil().max(1.0) as usize),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub alpha_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Interval length for ring confinement and the ℓ-graph checks.
    #[serde(default = "default_ell")]
    pub ell: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn default_ell() -> usize {
    20
}

/// One `(n, alpha, p)` combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub alpha: f64,
    pub p: f64,
}

impl Cell {
    fn order(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then(self.alpha.total_cmp(&other.alpha))
            .then(self.p.total_cmp(&other.p))
    }

    pub fn file_stem(&self) -> String {
        format!("n{}_alpha{}_p{}", self.n, self.alpha, self.p)
    }

    /// Seed shared by the cell's trials; trial `t` runs on stream `t`.
    pub fn seed(&self, sweep_seed: u64) -> u64 {
        RngStream::new(sweep_seed, 0)
            .derive(self.n as u64)
            .derive(self.alpha.to_bits())
            .derive(self.p.to_bits())
            .seed
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_values.is_empty() || self.alpha_values.is_empty() || self.p_values.is_empty() {
            return bad("n_values, alpha_values and p_values must be non-empty".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if let Some(n) = self.n_values.iter().find(|&&n| n < MIN_NODES || self.ell == 0 || self.ell > n / 3) {
            return bad(format!("n = {n} with ell = {}; need n >= {MIN_NODES} and 1 <= ell <= n/3", self.ell));
        }
        if let Some(a) = self.alpha_values.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return bad(format!("alpha = {a}; need a finite alpha > 0"));
        }
        if let Some(p) = self.p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("p = {p}; need 0 <= p <= 1"));
        }
        let th = &self.thresholds;
        if !(th.log_base > 1.0 && th.restart_k_frac >= 1.0 && th.restart_tau_multiplier > 0.0 && th.restart_beta_log > 0.0) {
            return bad("thresholds: need log_base > 1, restart_k_frac >= 1 and positive restart multipliers".into());
        }
        Ok(())
    }

    /// Every cell, in canonical `(n, alpha, p)` order, without duplicates.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells: Vec<Cell> = self
            .n_values
            .iter()
            .flat_map(|&n| {
                self.alpha_values
                    .iter()
                    .flat_map(move |&alpha| self.p_values.iter().map(move |&p| Cell { n, alpha, p }))
            })
            .collect();
        cells.sort_by(Cell::order);
        cells.dedup_by(|a, b| a.order(b) == Ordering::Equal);
        cells
    }
}

/// Measurements of one percolated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub n: usize,
    pub alpha: f64,
    pub p: f64,
    pub trial: usize,
    /// Cell seed; the trial is stream `trial` of it.
    pub seed: u64,
    pub largest_fraction: f64,
    pub max_component_size: usize,
    pub components: usize,
    pub diameter_lower: usize,
    pub diameter_upper: usize,
    pub diameter_exact: bool,
    pub spread_median: usize,
    pub spread_p90: usize,
    pub spread_max: usize,
    /// Fraction of nodes whose component stays within ring distance `2 ell^2`.
    pub confined_fraction: f64,
    /// Of the unpercolated graph.
    pub max_degree: usize,
    pub percolated_max_degree: usize,
    pub restarts: usize,
    pub restart_trigger: RestartTrigger,
    pub restart_reached: usize,
    pub coarse_size_violations: usize,
}

impl SweepRecord {
    fn cell(&self) -> Cell {
        Cell {
            n: self.n,
            alpha: self.alpha,
            p: self.p,
        }
    }
}

/// Nearest-rank quantile of an ascending slice.
fn quantile(sorted: &[usize], q: f64) -> usize {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Samples, percolates and measures trial `trial` of `cell`.
pub fn run_trial(cell: Cell, trial: usize, sweep_seed: u64, ell: usize, th: &Thresholds) -> Result<SweepRecord> {
    let Cell { n, alpha, p } = cell;
    let seed = cell.seed(sweep_seed);
    let stream = RngStream::new(seed, trial as u64);
    let g = Arc::new(sample_small_world(n, alpha, &stream.derive(GRAPH_STAGE), SamplingMode::Fast)?);
    let gp = percolate(&g, p, &stream.derive(PERCOLATION_STAGE))?;
    let labels = component_labels(&gp);
    let largest = labels.largest();
    let diam = diameter(&gp, &labels.members(largest))?;
    let mut spreads = ring_spreads(&gp, &labels);
    let confine = 2 * ell * ell;
    let confined = spreads.iter().filter(|&&s| s <= confine).count();
    spreads.sort_unstable();
    let restart = restart_search(&gp, &th.restart_params(n))?;
    let eg = build_ell_graph(&gp, ell, 0)?;
    Ok(SweepRecord {
        n,
        alpha,
        p,
        trial,
        seed,
        largest_fraction: labels.sizes[largest] as f64 / n as f64,
        max_component_size: labels.sizes[largest],
        components: labels.sizes.len(),
        diameter_lower: diam.lower().expect("component is connected"),
        diameter_upper: diam.upper().expect("component is connected"),
        diameter_exact: diam.lower() == diam.upper(),
        spread_median: quantile(&spreads, 0.5),
        spread_p90: quantile(&spreads, 0.9),
        spread_max: *spreads.last().expect("n >= 5"),
        confined_fraction: confined as f64 / n as f64,
        max_degree: max_degree(&*g),
        percolated_max_degree: max_degree(&gp),
        restarts: restart.restarts,
        restart_trigger: restart.trigger,
        restart_reached: restart.reached,
        coarse_size_violations: coarse_size_violations(&labels, &eg),
    })
}

pub fn write_records<W: Write>(records: &[SweepRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r).map_err(csv_error)?;
    }
    out.flush().map_err(|e| Error::Config(e.to_string()))?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    reader.deserialize().map(|r| r.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub cell: Cell,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub computed: usize,
    pub resumed: usize,
    pub records: usize,
    pub failures: Vec<CellFailure>,
    pub records_path: PathBuf,
}

/// A finished cell file is reused when it holds exactly the expected trials.
fn load_finished_cell(path: &Path, cell: Cell, cfg: &SweepConfig) -> Option<Vec<SweepRecord>> {
    let records = read_records(path).ok()?;
    let seed = cell.seed(cfg.seed);
    let complete = records.len() == cfg.trials
        && records
            .iter()
            .enumerate()
            .all(|(t, r)| r.trial == t && r.seed == seed && r.cell().order(&cell) == Ordering::Equal);
    complete.then_some(records)
}

fn run_cell(cell: Cell, cfg: &SweepConfig, cell_dir: &Path) -> Result<Vec<SweepRecord>> {
    let timed: Vec<(SweepRecord, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let start = Instant::now();
            let r = run_trial(cell, t, cfg.seed, cfg.ell, &cfg.thresholds)?;
            Ok((r, start.elapsed().as_secs_f64() * 1e3))
        })
        .collect::<Result<_>>()?;
    let mut timings = String::from("n,alpha,p,trial,wall_ms\n");
    for (r, ms) in &timed {
        timings.push_str(&format!("{},{},{},{},{ms:.3}\n", r.n, r.alpha, r.p, r.trial));
    }
    let records: Vec<SweepRecord> = timed.into_iter().map(|(r, _)| r).collect();
    let mut buf = Vec::new();
    write_records(&records, &mut buf)?;
    let stem = cell.file_stem();
    write_atomic(&cell_dir.join(format!("{stem}.timings.csv")), timings.as_bytes())?;
    write_atomic(&cell_dir.join(format!("{stem}.csv")), &buf)?;
    Ok(records)
}

/// Runs every cell of `cfg` into `out`, skipping cells already finished by
/// an earlier run. A failing cell is reported in the summary; the others
/// still run.
pub fn phase_sweep(cfg: &SweepConfig, out: &Path) -> Result<SweepSummary> {
    cfg.validate()?;
    let cell_dir = out.join("cells");
    fs::create_dir_all(&cell_dir).map_err(|e| Error::io(&cell_dir, e))?;
    write_atomic(&out.join("config.toml"), cfg.to_toml().as_bytes())?;
    let cells = cfg.cells();
    let mut summary = SweepSummary {
        cells: cells.len(),
        computed: 0,
        resumed: 0,
        records: 0,
        failures: Vec::new(),
        records_path: out.join("records.csv"),
    };
    let mut all = Vec::with_capacity(cells.len() * cfg.trials);
    let mut timings = String::from("n,alpha,p,trial,wall_ms\n");
    for cell in cells {
        let stem = cell.file_stem();
        let path = cell_dir.join(format!("{stem}.csv"));
        let records = match load_finished_cell(&path, cell, cfg) {
            Some(r) => {
                summary.resumed += 1;
                r
            }
            None => match run_cell(cell, cfg, &cell_dir) {
                Ok(r) => {
                    summary.computed += 1;
                    r
                }
                Err(e) => {
                    summary.failures.push(CellFailure {
                        cell,
                        error: e.to_string(),
                    });
                    continue;
                }
            },
        };
        if let Ok(t) = fs::read_to_string(cell_dir.join(format!("{stem}.timings.csv"))) {
            timings.extend(t.lines().skip(1).map(|l| format!("{l}\n")));
        }
        all.extend(records);
    }
    let mut buf = Vec::new();
    write_records(&all, &mut buf)?;
    write_atomic(&summary.records_path, &buf)?;
    write_atomic(&out.join("timings.csv"), timings.as_bytes())?;
    summary.records = all.len();
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `alpha < 1`.
    LongRange,
    /// `1 < alpha < 2`.
    SmallWorld,
    /// `alpha > 2`.
    Sparse,
}

impl Regime {
    /// `None` on the boundaries `alpha = 1` and `alpha = 2`.
    pub fn of(alpha: f64) -> Option<Self> {
        if alpha < 1.0 {
            Some(Regime::LongRange)
        } else if alpha > 1.0 && alpha < 2.0 {
            Some(Regime::SmallWorld)
        } else if alpha > 2.0 {
            Some(Regime::Sparse)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictRow {
    pub criterion: String,
    pub regime: Option<Regime>,
    pub alpha: Option<f64>,
    pub p: Option<f64>,
    /// Set for per-cell criteria; empty for fits across `n`.
    pub n: Option<usize>,
    pub observed: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// Which `p` values show a giant component, per `alpha`, at the largest `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    pub alpha: f64,
    pub p: f64,
    pub n: usize,
    pub median_largest_fraction: f64,
    pub giant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub verdicts: Vec<VerdictRow>,
    pub phases: Vec<PhaseRow>,
}

impl RegimeReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.verdict != Verdict::Fail)
    }

    pub fn rows<'a>(&'a self, criterion: &'a str) -> impl Iterator<Item = &'a VerdictRow> + 'a {
        self.verdicts.iter().filter(move |v| v.criterion == criterion)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for v in &self.verdicts {
            out.serialize(v).map_err(csv_error)?;
        }
        out.flush().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn write_phases_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for ph in &self.phases {
            out.serialize(ph).map_err(csv_error)?;
        }
        out.flush().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        (values[m / 2 - 1] + values[m / 2]) / 2.0
    }
}

/// Least-squares line through `(x, y)`: `(slope, intercept, r_squared)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

struct CellStats<'a> {
    cell: Cell,
    records: Vec<&'a SweepRecord>,
}

impl CellStats<'_> {
    fn fraction(&self, pred: impl Fn(&SweepRecord) -> bool) -> f64 {
        self.records.iter().filter(|r| pred(r)).count() as f64 / self.records.len() as f64
    }

    fn median(&self, f: impl Fn(&SweepRecord) -> f64) -> f64 {
        median(&mut self.records.iter().map(|r| f(r)).collect::<Vec<_>>())
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Evaluates the records against `th`, cell by cell and across `n` within each
/// `(alpha, p)` series.
pub fn regime_report(records: &[SweepRecord], th: &Thresholds, ell: usize) -> RegimeReport {
    let mut cells: Vec<CellStats> = Vec::new();
    let mut sorted: Vec<&SweepRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.alpha
            .total_cmp(&b.alpha)
            .then(a.p.total_cmp(&b.p))
            .then(a.n.cmp(&b.n))
            .then(a.trial.cmp(&b.trial))
    });
    for r in sorted {
        match cells.last_mut() {
            Some(c) if c.cell.order(&r.cell()) == Ordering::Equal => c.records.push(r),
            _ => cells.push(CellStats {
                cell: r.cell(),
                records: vec![r],
            }),
        }
    }

    let mut rows = Vec::new();
    let row = |criterion: &str, cell: Cell, n: Option<usize>, observed: f64, threshold: f64, v: Verdict| {
        VerdictRow {
            criterion: criterion.to_string(),
            regime: Regime::of(cell.alpha),
            alpha: Some(cell.alpha),
            p: Some(cell.p),
            n,
            observed,
            threshold,
            verdict: v,
        }
    };

    for c in &cells {
        let Cell { n, alpha, p } = c.cell;
        let log_n = th.log(n);
        let degree_cap = th.max_degree_mult * log_n + th.max_degree_add;
        let ok = c.fraction(|r| r.max_degree as f64 <= degree_cap);
        rows.push(row("max_degree", c.cell, Some(n), ok, th.max_degree_trial_fraction, verdict(ok >= th.max_degree_trial_fraction)));
        let violations: usize = c.records.iter().map(|r| r.coarse_size_violations).sum();
        rows.push(row("coarse_size_bound", c.cell, Some(n), violations as f64, 0.0, verdict(violations == 0)));

        if p < th.subcritical_p {
            let cap = th.subcritical_component_mult * log_n;
            let ok = c.fraction(|r| r.max_component_size as f64 <= cap);
            rows.push(row("subcritical_max_component", c.cell, Some(n), ok, th.subcritical_trial_fraction, verdict(ok >= th.subcritical_trial_fraction)));
            continue;
        }
        match Regime::of(alpha) {
            Some(Regime::Sparse) => {
                let med = c.median(|r| r.largest_fraction);
                rows.push(row("sparse_fraction", c.cell, Some(n), med, th.sparse_fraction_max, verdict(med <= th.sparse_fraction_max)));
                let med = c.median(|r| r.max_component_size as f64);
                let cap = th.sparse_component_mult * log_n;
                rows.push(row("sparse_max_component", c.cell, Some(n), med, cap, verdict(med <= cap)));
                let m = c.records.len() as f64;
                let mean = c.records.iter().map(|r| r.confined_fraction).sum::<f64>() / m;
                let var = c.records.iter().map(|r| (r.confined_fraction - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
                let bound = 1.0 - 8.0 / ((alpha - 2.0) * (ell as f64).powf((alpha - 2.0) / 2.0));
                let slack = th.confinement_sigmas * (var / m).sqrt();
                rows.push(row("sparse_confinement", c.cell, Some(n), mean, bound - slack, verdict(mean >= bound - slack)));
            }
            Some(regime) if p >= th.giant_p_min => {
                let ok = c.fraction(|r| r.largest_fraction >= th.giant_fraction_min);
                rows.push(row("giant_fraction", c.cell, Some(n), ok, th.giant_trial_fraction, verdict(ok >= th.giant_trial_fraction)));
                let worst = c.records.iter().map(|r| r.diameter_upper).max().unwrap_or(0) as f64;
                if regime == Regime::SmallWorld {
                    let cap = th.small_world_diameter_mult * log_n.powf(th.small_world_diameter_exponent);
                    rows.push(row("small_world_diameter", c.cell, Some(n), worst, cap, verdict(worst <= cap)));
                } else {
                    let cap = th.long_range_diameter_mult * log_n;
                    rows.push(row("long_range_diameter", c.cell, Some(n), worst, cap, verdict(worst <= cap)));
                    let ok = c.fraction(|r| r.restart_trigger != RestartTrigger::NoTrigger);
                    rows.push(row("long_range_restart", c.cell, Some(n), ok, th.restart_trial_fraction, verdict(ok >= th.restart_trial_fraction)));
                }
            }
            _ => {}
        }
    }

    // Fits across n within each (alpha, p) series; cells are sorted by
    // (alpha, p, n), so each series is a contiguous run.
    let mut start = 0;
    while start < cells.len() {
        let key = cells[start].cell;
        let end = start
            + cells[start..]
                .iter()
                .take_while(|c| c.cell.alpha == key.alpha && c.cell.p == key.p)
                .count();
        let series = &cells[start..end];
        start = end;
        let medians = |f: &dyn Fn(&SweepRecord) -> f64| -> Vec<(usize, f64)> {
            series.iter().map(|c| (c.cell.n, c.median(f))).collect()
        };
        let enough = |need: usize, criterion: &str, threshold: f64, rows: &mut Vec<VerdictRow>| {
            if series.len() < need {
                rows.push(VerdictRow {
                    criterion: criterion.to_string(),
                    regime: Regime::of(key.alpha),
                    alpha: Some(key.alpha),
                    p: Some(key.p),
                    n: None,
                    observed: f64::NAN,
                    threshold,
                    verdict: Verdict::Inconclusive,
                });
                false
            } else {
                true
            }
        };
        let fit_row = |criterion: &str, observed: f64, threshold: f64, ok: bool| {
            row(criterion, key, None, observed, threshold, verdict(ok))
        };
        let mut pending = Vec::new();

        if key.p < th.subcritical_p {
            if enough(2, "subcritical_growth", th.subcritical_growth_ratio, &mut pending) {
                let med = medians(&|r| r.max_component_size as f64);
                let worst = med.windows(2).map(|w| w[1].1 / w[0].1.max(1.0)).fold(0.0, f64::max);
                pending.push(fit_row("subcritical_growth", worst, th.subcritical_growth_ratio, worst <= th.subcritical_growth_ratio));
            }
        } else {
            match Regime::of(key.alpha) {
                Some(Regime::Sparse) => {
                    if enough(3, "sparse_log_fit", th.sparse_log_fit_r2, &mut pending) {
                        let pts: Vec<(f64, f64)> = medians(&|r| r.max_component_size as f64)
                            .into_iter()
                            .map(|(n, m)| (th.log(n), m))
                            .collect();
                        let (_, _, r2) = linear_fit(&pts);
                        pending.push(fit_row("sparse_log_fit", r2, th.sparse_log_fit_r2, r2 >= th.sparse_log_fit_r2));
                    }
                }
                Some(Regime::SmallWorld) if key.p >= th.giant_p_min => {
                    if enough(2, "small_world_diameter_exponent", th.small_world_max_fitted_exponent, &mut pending) {
                        let pts: Vec<(f64, f64)> = medians(&|r| r.diameter_upper as f64)
                            .into_iter()
                            .map(|(n, d)| (th.log(n).ln(), d.max(1.0).ln()))
                            .collect();
                        let (slope, _, _) = linear_fit(&pts);
                        pending.push(fit_row("small_world_diameter_exponent", slope, th.small_world_max_fitted_exponent, slope < th.small_world_max_fitted_exponent));
                    }
                }
                Some(Regime::LongRange) if key.p >= th.giant_p_min => {
                    if enough(2, "long_range_diameter_fit", th.long_range_diameter_mult, &mut pending) {
                        let pts: Vec<(f64, f64)> = medians(&|r| r.diameter_upper as f64)
                            .into_iter()
                            .map(|(n, d)| (th.log(n), d))
                            .collect();
                        let (slope, _, _) = linear_fit(&pts);
                        pending.push(fit_row("long_range_diameter_fit", slope, th.long_range_diameter_mult, slope <= th.long_range_diameter_mult));
                    }
                }
                _ => {}
            }
        }
        rows.extend(pending);
    }

    for regime in [Regime::LongRange, Regime::SmallWorld, Regime::Sparse] {
        if !cells.iter().any(|c| Regime::of(c.cell.alpha) == Some(regime)) {
            rows.push(VerdictRow {
                criterion: "coverage".to_string(),
                regime: Some(regime),
                alpha: None,
                p: None,
                n: None,
                observed: 0.0,
                threshold: 1.0,
                verdict: Verdict::Inconclusive,
            });
        }
    }

    let mut phases = Vec::new();
    for c in &cells {
        let top = cells
            .iter()
            .filter(|o| o.cell.alpha == c.cell.alpha && o.cell.p == c.cell.p)
            .map(|o| o.cell.n)
            .max();
        if top == Some(c.cell.n) {
            let med = c.median(|r| r.largest_fraction);
            phases.push(PhaseRow {
                alpha: c.cell.alpha,
                p: c.cell.p,
                n: c.cell.n,
                median_largest_fraction: med,
                giant: med >= th.giant_fraction_min,
            });
        }
    }
    RegimeReport { verdicts: rows, phases }
}
