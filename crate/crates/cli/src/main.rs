#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use edgezone::mc_oracle::{compare, simulate as run_simulation, SimConfig};
use edgezone::scenario::{
    export_cdf, load_scenario, read_json, run, zones_from_costs, CostFile, PathModelSpec, RunError,
    ScenarioError,
};
use edgezone::zoning::ZoneBoundary;
use edgezone::{total_processing_time, Exec, ModelError, SolverConfig, Weighting};

#[derive(Parser)]
#[command(
    name = "edgezone",
    version,
    about = "Latency-aware proximity zoning for edge hosts"
)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Microseconds per cost unit.
    #[arg(long, global = true)]
    unit_us: Option<f64>,
    /// Directory for report, CDF and trace files.
    #[arg(long, global = true, default_value = "edgezone-out")]
    out_dir: PathBuf,
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one path model and export its delay CDF.
    Solve {
        #[arg(long)]
        model: PathBuf,
        /// Microseconds per model time unit.
        #[arg(long, default_value_t = 1.0)]
        quantum_us: f64,
        #[arg(long, value_enum, default_value_t = WeightingArg::LastPacket)]
        weighting: WeightingArg,
    },
    /// Build a zone table from an explicit cost list.
    Zones {
        #[arg(long)]
        costs: PathBuf,
        /// Comma-separated `min:max` cost intervals, e.g. `0:5,0:10`.
        #[arg(long)]
        boundaries: Option<String>,
    },
    /// Run a full scenario: zoning, decisions and signalling.
    Decide {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Monte Carlo simulation of one path model.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        packets: u64,
    },
    /// Compare the analytic solution against simulation.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        packets: u64,
        #[arg(long, value_enum, default_value_t = WeightingArg::LastPacket)]
        weighting: WeightingArg,
    },
    /// Engine choice against uniformly random zoned selection.
    Baseline {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        trials: Option<u32>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    LastPacket,
    BatchAveraged,
    PerPacket,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::LastPacket => Weighting::LastPacket,
            WeightingArg::BatchAveraged => Weighting::BatchAveraged,
            WeightingArg::PerPacket => Weighting::PerPacket,
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Scenario(s) => s.into(),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn config<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Config(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn exec(cli: &Cli) -> Exec {
    if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<String, Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    fs::create_dir_all(dir).map_err(runtime)?;
    fs::write(dir.join(name), &text).map_err(runtime)?;
    Ok(text)
}

fn print(text: &str) {
    let _ = io::stdout().write_all(text.as_bytes());
}

fn parse_boundaries(s: &str) -> Result<Vec<ZoneBoundary>, Failure> {
    s.split(',')
        .map(|part| {
            let (lo, hi) = part
                .trim()
                .split_once(':')
                .ok_or_else(|| config(format!("boundary `{part}` is not `min:max`")))?;
            let num = |x: &str| {
                x.trim()
                    .parse::<u64>()
                    .map_err(|e| config(format!("boundary `{part}`: {e}")))
            };
            Ok(ZoneBoundary {
                min_cost: num(lo)?,
                max_cost: num(hi)?,
            })
        })
        .collect()
}

fn load_model(path: &Path) -> Result<edgezone::PathModel, Failure> {
    let spec: PathModelSpec = read_json(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "path".into());
    spec.build(&id).map_err(|e: ModelError| config(e))
}

#[derive(Serialize)]
struct SolveSummary {
    path_id: String,
    load: f64,
    converged: bool,
    iterations: usize,
    loss_probability: f64,
    mean_units: Option<f64>,
    p50_units: Option<usize>,
    p95_units: Option<usize>,
    p99_units: Option<usize>,
    quantum_us: f64,
    cdf_file: String,
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let out = &cli.out_dir;
    match &cli.command {
        Command::Solve {
            model,
            quantum_us,
            weighting,
        } => {
            if !(*quantum_us > 0.0) {
                return Err(config("--quantum-us must be positive"));
            }
            let model = load_model(model)?;
            let cfg = SolverConfig {
                weighting: (*weighting).into(),
                exec: exec(cli),
                ..SolverConfig::default()
            };
            let r = total_processing_time(&model, &cfg).map_err(runtime)?;
            let q = |p: f64| r.percentile(p).ok().and_then(|x| x.value());
            let summary = SolveSummary {
                path_id: r.path_id.clone(),
                load: r.load,
                converged: r.converged,
                iterations: r.iterations,
                loss_probability: r.loss_probability,
                mean_units: r.mean().ok(),
                p50_units: q(0.5),
                p95_units: q(0.95),
                p99_units: q(0.99),
                quantum_us: *quantum_us,
                cdf_file: "cdf.csv".into(),
            };
            fs::create_dir_all(out).map_err(runtime)?;
            let f = fs::File::create(out.join("cdf.csv")).map_err(runtime)?;
            export_cdf(&r.total, *quantum_us, 0.0, io::BufWriter::new(f)).map_err(runtime)?;
            print(&write_json(out, "solve.json", &summary)?);
            if !r.converged {
                return Err(runtime(format!(
                    "solver did not converge within {} iterations",
                    r.iterations
                )));
            }
            Ok(())
        }
        Command::Zones { costs, boundaries } => {
            let file: CostFile = read_json(costs)?;
            let bounds = match (boundaries, &file.boundaries) {
                (Some(s), _) => parse_boundaries(s)?,
                (None, Some(b)) => b.clone(),
                (None, None) => return Err(config("no boundaries given")),
            };
            let table = zones_from_costs(&file, &bounds).map_err(config)?;
            print(&write_json(out, "zones.json", &table)?);
            Ok(())
        }
        Command::Decide { scenario } => {
            let mut s = load_scenario(scenario)?;
            apply_overrides(cli, &mut s)?;
            let output = run(&s, exec(cli))?;
            output.write(out)?;
            for r in &output.report.requests {
                println!(
                    "{} {} -> {} [{}]",
                    r.app_id, r.service_id, r.response, r.correlation_id
                );
            }
            for w in &output.report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
        Command::Simulate { model, packets } => {
            let model = load_model(model)?;
            let cfg = SimConfig::new(model, *packets, cli.seed.unwrap_or(0));
            let report = run_simulation(&cfg);
            fs::create_dir_all(out).map_err(runtime)?;
            let f = fs::File::create(out.join("histogram.txt")).map_err(runtime)?;
            report
                .empirical_delay
                .write_text(io::BufWriter::new(f))
                .map_err(runtime)?;
            #[derive(Serialize)]
            struct SimSummary {
                path_id: String,
                seed: u64,
                packet_budget: u64,
                accepted: u64,
                rejected: u64,
                warmup_discarded: u64,
                rejection_fraction: f64,
                histogram_file: &'static str,
            }
            let summary = SimSummary {
                path_id: report.path_id.clone(),
                seed: report.seed,
                packet_budget: report.packet_budget,
                accepted: report.accepted,
                rejected: report.rejected,
                warmup_discarded: report.warmup_discarded,
                rejection_fraction: report.rejection_fraction(),
                histogram_file: "histogram.txt",
            };
            print(&write_json(out, "simulate.json", &summary)?);
            Ok(())
        }
        Command::Validate {
            model,
            packets,
            weighting,
        } => {
            let model = load_model(model)?;
            let w: Weighting = (*weighting).into();
            let cfg = SolverConfig {
                weighting: w,
                exec: exec(cli),
                ..SolverConfig::default()
            };
            let result = total_processing_time(&model, &cfg).map_err(runtime)?;
            let sim = run_simulation(&SimConfig::new(
                model.clone(),
                *packets,
                cli.seed.unwrap_or(0),
            ));
            let cmp = compare(&model, &result, &sim, w).map_err(runtime)?;
            print(&write_json(out, "validate.json", &cmp)?);
            Ok(())
        }
        Command::Baseline { scenario, trials } => {
            let mut s = load_scenario(scenario)?;
            apply_overrides(cli, &mut s)?;
            if let Some(t) = trials {
                s.baseline_trials = *t;
            }
            let output = run(&s, exec(cli))?;
            #[derive(Serialize)]
            struct Row<'a> {
                app_id: &'a str,
                service_id: &'a str,
                comparison: &'a Option<edgezone::meo_decision::BaselineComparison>,
            }
            let rows: Vec<Row> = output
                .report
                .requests
                .iter()
                .map(|r| Row {
                    app_id: &r.app_id,
                    service_id: &r.service_id,
                    comparison: &r.baseline,
                })
                .collect();
            print(&write_json(out, "baseline.json", &rows)?);
            Ok(())
        }
    }
}

fn apply_overrides(cli: &Cli, s: &mut edgezone::scenario::Scenario) -> Result<(), Failure> {
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(u) = cli.unit_us {
        s.unit_us = u;
    }
    s.validate().map_err(Failure::from)
}
