use std::io::Write;
use std::path::Path;

use bulkq_core::roots::{Characteristic, PolarPoint, RootSet};
use bulkq_core::simulator::{Comparison, SimStats};
use bulkq_core::solver::{Metric, RouteReport, StationKernel};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Nine significant digits, '.' separator, `inf` for infinities.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap();
    let a = rounded.abs();
    if (1e-4..1e9).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

pub fn metric(m: Metric) -> String {
    match m {
        Metric::Value(v) => num(v),
        Metric::Unbounded => "inf".into(),
        Metric::NotApplicable => "n/a".into(),
    }
}

pub const REPORT_HEADER: [&str; 13] = [
    "station",
    "lambda",
    "rho",
    "stable",
    "e_queue",
    "var_queue",
    "sd_queue",
    "e_wait",
    "var_wait",
    "sd_wait",
    "headway_mu",
    "headway_sigma",
    "zero_mass",
];

pub const SIM_HEADER: [&str; 14] = [
    "station",
    "lambda",
    "samples",
    "e_queue_sim",
    "e_queue_se",
    "sd_queue_sim",
    "sd_queue_se",
    "e_wait_sim",
    "e_wait_se",
    "sd_wait_sim",
    "sd_wait_se",
    "headway_mean_sim",
    "headway_sd_sim",
    "wait_samples",
];

pub fn report_rows(rep: &RouteReport) -> Vec<Vec<String>> {
    rep.per_station
        .iter()
        .map(|m| {
            vec![
                m.station.to_string(),
                num(m.lambda),
                num(m.rho),
                m.stable.to_string(),
                metric(m.eq),
                metric(m.varq),
                metric(m.sd_queue()),
                metric(m.ew),
                metric(m.varw),
                metric(m.sd_wait()),
                num(m.headway.mu),
                num(m.headway.sigma),
                num(m.headway.zero_mass),
            ]
        })
        .collect()
}

pub fn sim_rows(stats: &SimStats) -> Vec<Vec<String>> {
    stats
        .per_station
        .iter()
        .map(|s| {
            let wait = |x: f64| if s.wait.count == 0 { "n/a".to_string() } else { num(x) };
            vec![
                s.station.to_string(),
                num(s.lambda),
                s.queue.count.to_string(),
                num(s.queue.mean),
                num(s.queue.se_mean),
                num(s.queue.sd()),
                num(s.queue.se_sd),
                wait(s.wait.mean),
                wait(s.wait.se_mean),
                wait(s.wait.sd()),
                wait(s.wait.se_sd),
                num(s.headway.mean),
                num(s.headway.sd()),
                s.wait.count.to_string(),
            ]
        })
        .collect()
}

pub fn comparison_rows(cmp: &Comparison) -> Vec<Vec<String>> {
    cmp.rows
        .iter()
        .map(|r| {
            let opt = |x: f64| if x.is_nan() { "n/a".to_string() } else { num(x) };
            vec![
                r.station.to_string(),
                r.metric.clone(),
                opt(r.theory),
                num(r.sim),
                opt(r.abs_gap),
                opt(r.rel_gap),
                num(r.se),
                opt(r.allowed),
                r.status.as_str().to_string(),
            ]
        })
        .collect()
}

pub const COMPARE_HEADER: [&str; 9] =
    ["station", "metric", "theory", "sim", "abs_gap", "rel_gap", "se", "allowed", "status"];

pub const ROOTS_HEADER: [&str; 5] = ["re", "im", "r", "phi", "residual"];

pub fn root_rows(kernel: &StationKernel, roots: &RootSet) -> Vec<Vec<String>> {
    roots
        .roots()
        .iter()
        .map(|&z| {
            let p = PolarPoint::from_complex(z);
            let residual = kernel.den(z).map_or(f64::INFINITY, |d| d.norm());
            vec![num(z.re), num(z.im), num(p.r), num(p.phi), num(residual)]
        })
        .collect()
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::io(path, e))?;
    writeln!(f).map_err(|e| CliError::io(path, e))
}
