use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use swperc::analysis::{component_labels, diameter, max_degree};
use swperc::branching::{extinction_fixed_point, extinction_rate, ExtinctionReport, Offspring};
use swperc::edgelist::EdgeList;
use swperc::epidemic::{coupled_cascade, exact_outbreak_distribution, reed_frost, reed_frost_histogram, CascadeTrajectory, EnumerationMethod};
use swperc::harness::{phase_sweep, read_records, regime_report, SweepConfig, Thresholds};
use swperc::model::{percolate, sample_small_world};
use swperc::renorm::{build_ell_graph, coarse_size_violations};
use swperc::{Error, Result, RngStream, SamplingMode};

#[derive(Parser, Debug)]
#[command(name = "swperc", version, about = "Percolation and epidemics on power-law small-world rings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Master seed; sweeps fall back to the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (directory for `sweep`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    /// CSV tables; graphs use the text edge-list format.
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Fast,
    Naive,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Percolation,
    Cascade,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample SW(n, alpha) and write its edge list.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = Mode::Fast)]
        mode: Mode,
        #[command(flatten)]
        common: Common,
    },
    /// Percolate a sampled graph, keeping each edge with probability p.
    Percolate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        p: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Component statistics of an edge-list file.
    Components {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Coarse-grain a graph into intervals of `ell` nodes.
    Ellgraph {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        ell: usize,
        #[arg(long, default_value_t = 0)]
        offset: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Reed-Frost cascade on a graph. Without --p, a percolated file is
    /// replayed as its coupled cascade.
    Cascade {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        p: Option<f64>,
        /// Comma-separated initially infectious nodes.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<usize>,
        /// Exact outbreak-size distribution instead of one run.
        #[arg(long, value_enum, conflicts_with = "runs")]
        exact: Option<Method>,
        /// Monte-Carlo outbreak-size histogram over this many runs.
        #[arg(long)]
        runs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Galton-Watson extinction rate, e.g. --law 'poisson(2)'.
    Gw {
        #[arg(long)]
        law: String,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run a parameter sweep from a TOML config; resumes finished cells.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Regime verdicts for a sweep directory. Exits 2 when any verdict fails.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Also write the phase table here (CSV).
        #[arg(long)]
        phases: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(common: &Common, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    let mut w = sink(&common.out)?;
    let target = common.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(target, e))
}

fn emit_json(common: &Common, value: &impl serde::Serialize) -> Result<()> {
    emit(common, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn read_edge_list(path: &Path) -> Result<EdgeList> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    EdgeList::read(BufReader::new(file))
}

fn write_graph(common: &Common, el: &EdgeList) -> Result<()> {
    match common.format {
        Format::Csv => emit(common, |w| el.write(w)),
        Format::Json => emit_json(common, el),
    }
}

fn write_trajectory(common: &Common, tr: &CascadeTrajectory) -> Result<()> {
    match common.format {
        Format::Json => emit_json(common, tr),
        Format::Csv => emit(common, |w| {
            writeln!(w, "t,susceptible,infectious,recovered")?;
            for (t, s) in tr.steps.iter().enumerate() {
                writeln!(w, "{t},{},{},{}", s.susceptible.len(), s.infectious.len(), s.recovered.len())?;
            }
            Ok(())
        }),
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Sample { n, alpha, mode, common } => {
            let mode = match mode {
                Mode::Fast => SamplingMode::Fast,
                Mode::Naive => SamplingMode::Naive,
            };
            let g = sample_small_world(n, alpha, &RngStream::new(common.seed.unwrap_or(0), 0), mode)?;
            write_graph(&common, &EdgeList::from_small_world(&g))?;
        }
        Command::Percolate { input, p, common } => {
            let el = read_edge_list(&input)?;
            if el.percolation.is_some() {
                return Err(Error::input(format!("{} is already percolated", input.display())));
            }
            let seed = common.seed.unwrap_or(0);
            let gp = percolate(&Arc::new(el.to_small_world()?), p, &RngStream::new(seed, 0))?;
            write_graph(&common, &EdgeList::from_percolation(&gp, seed))?;
        }
        Command::Components { input, common } => {
            let gp = read_edge_list(&input)?.to_percolation()?;
            let labels = component_labels(&gp);
            let largest = labels.largest();
            let diam = diameter(&gp, &labels.members(largest))?;
            let row = json!({
                "n": gp.n(),
                "components": labels.sizes.len(),
                "largest_size": labels.sizes[largest],
                "largest_fraction": labels.sizes[largest] as f64 / gp.n() as f64,
                "diameter_lower": diam.lower(),
                "diameter_upper": diam.upper(),
                "max_degree": max_degree(&gp),
            });
            match common.format {
                Format::Json => emit_json(&common, &row)?,
                Format::Csv => emit(&common, |w| {
                    let obj = row.as_object().expect("object");
                    writeln!(w, "{}", obj.keys().cloned().collect::<Vec<_>>().join(","))?;
                    writeln!(w, "{}", obj.values().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
                })?,
            }
        }
        Command::Ellgraph { input, ell, offset, common } => {
            let gp = read_edge_list(&input)?.to_percolation()?;
            let eg = build_ell_graph(&gp, ell, offset)?;
            match common.format {
                Format::Json => emit_json(
                    &common,
                    &json!({
                        "ell": eg.ell(),
                        "offset": eg.offset(),
                        "supernodes": eg.supernodes(),
                        "super_edges": eg.super_edges(),
                        "super_bridges": eg.super_bridges(),
                        "coarse_size_violations": coarse_size_violations(&component_labels(&gp), &eg),
                    }),
                )?,
                Format::Csv => emit(&common, |w| {
                    writeln!(w, "a,b,kind")?;
                    for (a, b) in eg.super_edges() {
                        writeln!(w, "{a},{b},super_edge")?;
                    }
                    for (a, b) in eg.super_bridges() {
                        writeln!(w, "{a},{b},super_bridge")?;
                    }
                    Ok(())
                })?,
            }
        }
        Command::Cascade { input, p, seeds, exact, runs, common } => {
            let el = read_edge_list(&input)?;
            let stream = RngStream::new(common.seed.unwrap_or(0), 0);
            let Some(p) = p else {
                if exact.is_some() || runs.is_some() {
                    return Err(Error::input("--exact and --runs need --p"));
                }
                let tr = coupled_cascade(&el.to_percolation()?, &seeds)?;
                write_trajectory(&common, &tr)?;
                return Ok(ExitCode::SUCCESS);
            };
            if el.percolation.is_some() {
                return Err(Error::input("cascades with --p run on an unpercolated graph"));
            }
            let g = el.to_small_world()?.to_graph();
            if let Some(method) = exact {
                let method = match method {
                    Method::Percolation => EnumerationMethod::PercolationEnum,
                    Method::Cascade => EnumerationMethod::CascadeEnum,
                };
                let dist = exact_outbreak_distribution(&g, p, &seeds, method)?;
                match common.format {
                    Format::Json => emit_json(&common, &dist)?,
                    Format::Csv => emit(&common, |w| dist.write_csv(w))?,
                }
            } else if let Some(runs) = runs {
                let hist = reed_frost_histogram(&g, p, &seeds, runs, &stream)?;
                match common.format {
                    Format::Json => emit_json(&common, &json!({ "runs": runs, "probabilities": hist }))?,
                    Format::Csv => emit(&common, |w| {
                        writeln!(w, "total_infected,probability")?;
                        for (k, f) in hist.iter().enumerate().filter(|(_, f)| **f > 0.0) {
                            writeln!(w, "{k},{f}")?;
                        }
                        Ok(())
                    })?,
                }
            } else {
                let tr = reed_frost(&g, p, &seeds, &mut stream.rng())?;
                write_trajectory(&common, &tr)?;
            }
        }
        Command::Gw { law, budget, trials, common } => {
            let law: Offspring = law.parse()?;
            let report = extinction_rate(&law, budget, trials, &RngStream::new(common.seed.unwrap_or(0), 0))?;
            match common.format {
                Format::Json => {
                    // Fixed point of the generating function, when it is computable.
                    let fixed_point = extinction_fixed_point(&law).ok();
                    emit_json(&common, &json!({ "report": report, "fixed_point": fixed_point }))?
                }
                Format::Csv => emit(&common, |w| ExtinctionReport::write_csv(&[report], w))?,
            }
        }
        Command::Sweep { config, common } => {
            let mut cfg = SweepConfig::load(&config)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            let dir = common
                .out
                .clone()
                .or_else(|| cfg.output.clone())
                .ok_or_else(|| Error::Config("no output directory; pass --out or set `output`".into()))?;
            let summary = phase_sweep(&cfg, &dir)?;
            for f in &summary.failures {
                eprintln!("cell n={} alpha={} p={} failed: {}", f.cell.n, f.cell.alpha, f.cell.p, f.error);
            }
            // The directory is the sweep's output; the summary goes to stdout.
            let report = Common {
                seed: None,
                out: None,
                format: common.format,
            };
            match common.format {
                Format::Json => emit_json(&report, &summary)?,
                Format::Csv => emit(&report, |w| {
                    writeln!(w, "cells,computed,resumed,records,failures")?;
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        summary.cells,
                        summary.computed,
                        summary.resumed,
                        summary.records,
                        summary.failures.len()
                    )
                })?,
            }
            if !summary.failures.is_empty() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Report { input, phases, common } => {
            let cfg_path = input.join("config.toml");
            let (thresholds, ell) = if cfg_path.exists() {
                let cfg = SweepConfig::load(&cfg_path)?;
                (cfg.thresholds, cfg.ell)
            } else {
                (Thresholds::default(), 20)
            };
            let records = read_records(&input.join("records.csv"))?;
            let report = regime_report(&records, &thresholds, ell);
            match common.format {
                Format::Json => emit_json(&common, &report)?,
                Format::Csv => {
                    let mut w = sink(&common.out)?;
                    report.write_csv(&mut w)?;
                }
            }
            if let Some(path) = phases {
                let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
                report.write_phases_csv(BufWriter::new(file))?;
            }
            if !report.passed() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
