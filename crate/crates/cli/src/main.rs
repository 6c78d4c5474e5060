mod format;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bulkq_core::model::{ensure_valid, expand_grid, Scenario, SweepParam};
use bulkq_core::simulator::{
    compare, run_simulation, SimConfig, SimStats, Tolerances, DEFAULT_RUNS, DEFAULT_SEED, DEFAULT_WARMUP,
};
use bulkq_core::solver::{analyze_route, station_roots, AnalysisOptions, Metric, RouteReport};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;

use format::Format;

#[derive(Parser)]
#[command(name = "bulkq", version, about = "Queue lengths and waits on a bus line with random suspensions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytical per-station report.
    Analyze {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Monte Carlo estimates of the same quantities.
    Simulate {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// One report per value of a single parameter.
    Sweep {
        #[command(flatten)]
        input: Input,
        /// capacity, gamma, theta, nominal_headway or demand_factor
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Also simulate every scenario.
        #[arg(long)]
        simulate: bool,
        #[command(flatten)]
        sim: SimArgs,
        /// Worker threads; defaults to available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Theory against simulation, station by station.
    Compare {
        /// RouteReport JSON written by `analyze --format json`.
        #[arg(long)]
        theory: PathBuf,
        /// SimStats JSON from `simulate --format json`, or another RouteReport.
        #[arg(long)]
        sim: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Relative tolerance on means.
        #[arg(long)]
        tol_mean: Option<f64>,
        /// Relative tolerance on standard deviations.
        #[arg(long)]
        tol_var: Option<f64>,
        /// Absolute floor on E[Q], passengers.
        #[arg(long)]
        queue_abs: Option<f64>,
        /// Absolute floor on E[W], minutes.
        #[arg(long)]
        wait_abs: Option<f64>,
    },
    /// Dump the characteristic roots of one station.
    Roots {
        #[command(flatten)]
        input: Input,
        /// 1-based station index.
        #[arg(long)]
        station: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Input {
    /// Scenario JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario: reference, reference-h6, reference-h4.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Fraction of runs discarded as warm-up.
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: f64,
}

impl SimArgs {
    fn config(&self, sc: Scenario) -> SimConfig {
        SimConfig { scenario: sc, runs: self.runs, warmup_fraction: self.warmup, seed: self.seed }
    }
}

#[derive(Debug)]
pub struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    pub const TOLERANCE: u8 = 1;
    pub const INPUT: u8 = 2;
    pub const SOLVER: u8 = 3;

    fn input(msg: impl Into<String>) -> CliError {
        CliError { code: Self::INPUT, msg: msg.into() }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> CliError {
        CliError::input(format!("{}: {e}", path.display()))
    }
}

impl From<bulkq_core::Error> for CliError {
    fn from(e: bulkq_core::Error) -> CliError {
        let code = if e.is_validation() { Self::INPUT } else { Self::SOLVER };
        CliError { code, msg: e.to_string() }
    }
}

fn load_scenario(input: &Input) -> Result<Scenario, CliError> {
    let sc = match (&input.config, &input.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::io(path, e))?
        }
        (None, Some(name)) => Scenario::preset(name).ok_or_else(|| CliError::input(format!("unknown preset `{name}`")))?,
        (None, None) => unreachable!("clap enforces one input"),
    };
    ensure_valid(&sc)?;
    Ok(sc)
}

fn write_report(path: &Path, rep: &RouteReport, fmt: Format) -> Result<(), CliError> {
    match fmt {
        Format::Csv => format::write_csv(path, &format::REPORT_HEADER, &format::report_rows(rep)),
        Format::Json => format::write_json(path, rep),
    }
}

fn write_stats(path: &Path, stats: &SimStats, fmt: Format) -> Result<(), CliError> {
    match fmt {
        Format::Csv => format::write_csv(path, &format::SIM_HEADER, &format::sim_rows(stats)),
        Format::Json => format::write_json(path, stats),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SimInput {
    Stats(SimStats),
    Report(RouteReport),
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, format!("not a JSON document of the expected kind ({e})")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze { input, out, format } => {
            let sc = load_scenario(&input)?;
            let rep = analyze_route(&sc)?;
            write_report(&out, &rep, format)
        }
        Command::Simulate { input, sim, out, format } => {
            let sc = load_scenario(&input)?;
            let stats = run_simulation(&sim.config(sc))?;
            write_stats(&out, &stats, format)
        }
        Command::Sweep { input, param, values, out, simulate, sim, jobs } => {
            let base = load_scenario(&input)?;
            let param: SweepParam = param.parse()?;
            sweep(&base, param, &values, &out, simulate.then_some(&sim), jobs)
        }
        Command::Compare { theory, sim, out, format, tol_mean, tol_var, queue_abs, wait_abs } => {
            let report: RouteReport = read_json(&theory)?;
            let stats = match read_json::<SimInput>(&sim)? {
                SimInput::Stats(s) => s,
                SimInput::Report(r) => SimStats::from_report(&r),
            };
            if report.label != stats.label {
                return Err(CliError::input(format!(
                    "scenario labels differ: theory `{}`, simulation `{}`",
                    report.label, stats.label
                )));
            }
            let d = Tolerances::default();
            let tol = Tolerances {
                queue_abs: queue_abs.unwrap_or(d.queue_abs),
                wait_abs: wait_abs.unwrap_or(d.wait_abs),
                mean_rel: tol_mean.unwrap_or(d.mean_rel),
                sd_rel: tol_var.unwrap_or(d.sd_rel),
            };
            let cmp = compare(&report, &stats, &tol)?;
            match format {
                Format::Csv => format::write_csv(&out, &format::COMPARE_HEADER, &format::comparison_rows(&cmp))?,
                Format::Json => format::write_json(&out, &cmp)?,
            }
            let failed: Vec<_> = cmp.failures().collect();
            if failed.is_empty() {
                return Ok(());
            }
            for r in &failed {
                eprintln!(
                    "station {} {}: theory {} sim {} gap {} > {}",
                    r.station,
                    r.metric,
                    format::num(r.theory),
                    format::num(r.sim),
                    format::num(r.abs_gap),
                    format::num(r.allowed)
                );
            }
            Err(CliError { code: CliError::TOLERANCE, msg: format!("{} of {} checks out of tolerance", failed.len(), cmp.rows.len()) })
        }
        Command::Roots { input, station, out } => {
            let sc = load_scenario(&input)?;
            let (kernel, roots, _) = station_roots(&sc, station, &AnalysisOptions::default())?;
            format::write_csv(&out, &format::ROOTS_HEADER, &format::root_rows(&kernel, &roots))
        }
    }
}

struct SweepPoint {
    value: f64,
    report: RouteReport,
    stats: Option<SimStats>,
}

fn sweep(
    base: &Scenario,
    param: SweepParam,
    values: &[f64],
    out: &Path,
    sim: Option<&SimArgs>,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let scenarios = expand_grid(base, param, values)?;
    for sc in &scenarios {
        ensure_valid(sc).map_err(|e| CliError::from(e).context(&format!("{}={}", param, param.get(sc))))?;
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::input(e.to_string()))?;
    let points: Vec<Result<SweepPoint, CliError>> = pool.install(|| {
        scenarios
            .par_iter()
            .zip(values.par_iter())
            .map(|(sc, &value)| {
                let tag = format!("{param}={value}");
                let report = analyze_route(sc).map_err(|e| CliError::from(e).context(&tag))?;
                let stats = match sim {
                    Some(a) => Some(run_simulation(&a.config(sc.clone())).map_err(|e| CliError::from(e).context(&tag))?),
                    None => None,
                };
                Ok(SweepPoint { value, report, stats })
            })
            .collect()
    });

    let mut index = Vec::new();
    let mut errors = Vec::new();
    for p in points {
        let p = match p {
            Ok(p) => p,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        let stem = format!("{}_{}", param, p.value);
        write_report(&out.join(format!("report_{stem}.csv")), &p.report, Format::Csv)?;
        write_report(&out.join(format!("report_{stem}.json")), &p.report, Format::Json)?;
        if let Some(stats) = &p.stats {
            write_stats(&out.join(format!("sim_{stem}.csv")), stats, Format::Csv)?;
            write_stats(&out.join(format!("sim_{stem}.json")), stats, Format::Json)?;
        }
        index.extend(index_rows(param, &p));
    }
    let mut header = INDEX_HEADER.to_vec();
    if sim.is_some() {
        header.extend(INDEX_SIM_HEADER);
    }
    format::write_csv(&out.join("index.csv"), &header, &index)?;

    match errors.into_iter().max_by_key(|e| e.code) {
        None => Ok(()),
        Some(e) => Err(e),
    }
}

const INDEX_HEADER: [&str; 13] = [
    "param",
    "value",
    "station",
    "rho",
    "stable",
    "e_queue",
    "sd_queue",
    "e_queue_lo",
    "e_queue_hi",
    "e_wait",
    "sd_wait",
    "e_wait_lo",
    "e_wait_hi",
];

const INDEX_SIM_HEADER: [&str; 4] = ["e_queue_sim", "sd_queue_sim", "e_wait_sim", "sd_wait_sim"];

/// Plotting bands are mean ± 0.2 sd.
const BAND: f64 = 0.2;

fn band(mean: Metric, sd: Metric, sign: f64) -> String {
    match (mean, sd) {
        (Metric::Value(m), Metric::Value(s)) => format::num(m + sign * BAND * s),
        (m, _) => format::metric(m),
    }
}

fn index_rows(param: SweepParam, p: &SweepPoint) -> Vec<Vec<String>> {
    p.report
        .per_station
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut row = vec![
                param.to_string(),
                format::num(p.value),
                m.station.to_string(),
                format::num(m.rho),
                m.stable.to_string(),
                format::metric(m.eq),
                format::metric(m.sd_queue()),
                band(m.eq, m.sd_queue(), -1.0),
                band(m.eq, m.sd_queue(), 1.0),
                format::metric(m.ew),
                format::metric(m.sd_wait()),
                band(m.ew, m.sd_wait(), -1.0),
                band(m.ew, m.sd_wait(), 1.0),
            ];
            if let Some(stats) = &p.stats {
                let s = &stats.per_station[i];
                let wait = |x: f64| if s.wait.count == 0 { "n/a".to_string() } else { format::num(x) };
                row.extend([format::num(s.queue.mean), format::num(s.queue.sd()), wait(s.wait.mean), wait(s.wait.sd())]);
            }
            row
        })
        .collect()
}

impl CliError {
    fn context(mut self, what: &str) -> CliError {
        self.msg = format!("{what}: {}", self.msg);
        self
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bulkq: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
