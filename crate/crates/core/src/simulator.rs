//! Discrete-event Monte Carlo of the line, and the theory-vs-simulation table.
//!
//! Vehicles leave the hub every H̄ᴬᵈʲ minutes. On each segment a vehicle
//! picks up a compound Poisson-exponential delay; its departure from a
//! station is the later of its own schedule plus delay and the previous
//! vehicle's departure (no overtaking). Passengers arrive as a Poisson
//! process, queue FCFS and board up to the free capacity.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::error::{Error, Result};
use crate::model::{ensure_valid, Scenario};
use crate::sampling;
use crate::solver::{Metric, RouteReport};

pub const MIN_RUNS: usize = 100;
pub const DEFAULT_RUNS: usize = 50_000;
pub const DEFAULT_WARMUP: f64 = 0.10;
pub const DEFAULT_SEED: u64 = 42;
/// Batches used for the batch-means standard errors.
pub const BATCHES: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub runs: usize,
    pub warmup_fraction: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(scenario: Scenario) -> SimConfig {
        SimConfig { scenario, runs: DEFAULT_RUNS, warmup_fraction: DEFAULT_WARMUP, seed: DEFAULT_SEED }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_valid(&self.scenario)?;
        if self.runs < MIN_RUNS {
            return Err(Error::InvalidSimulation("runs must be at least 100"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::InvalidSimulation("warmup_fraction must lie in [0, 1)"));
        }
        Ok(())
    }

    fn warmup_runs(&self) -> usize {
        libm::floor(self.warmup_fraction * self.runs as f64) as usize
    }
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combine two accumulators (parallel merge).
    pub fn merge(&self, other: &Welford) -> Welford {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        Welford {
            count: n,
            mean: self.mean + d * nb / n as f64,
            m2: self.m2 + other.m2 + d * d * na * nb / n as f64,
        }
    }

    /// Sample variance, 0 below two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 { 0.0 } else { self.m2 / (self.count - 1) as f64 }
    }
}

/// Summary of one recorded quantity. Standard errors come from batch means
/// over consecutive vehicles, which keeps them honest under the strong
/// serial correlation of queue lengths.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleSummary {
    pub count: u64,
    pub mean: f64,
    pub var: f64,
    pub se_mean: f64,
    pub se_sd: f64,
}

impl SampleSummary {
    pub fn sd(&self) -> f64 {
        libm::sqrt(self.var.max(0.0))
    }

    fn from_batches(batches: &[Welford]) -> SampleSummary {
        let all = batches.iter().fold(Welford::default(), |a, b| a.merge(b));
        if all.count == 0 {
            return SampleSummary::default();
        }
        let mut means = Welford::default();
        let mut sds = Welford::default();
        for b in batches.iter().filter(|b| b.count > 1) {
            means.push(b.mean);
            sds.push(libm::sqrt(b.variance()));
        }
        let k = means.count.max(1) as f64;
        SampleSummary {
            count: all.count,
            mean: all.mean,
            var: all.variance(),
            se_mean: libm::sqrt(means.variance() / k),
            se_sd: libm::sqrt(sds.variance() / k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StationSimStats {
    pub station: usize,
    pub lambda: f64,
    /// Queue length seen by an arriving vehicle.
    pub queue: SampleSummary,
    /// Individual passenger waits; empty when nobody arrives.
    pub wait: SampleSummary,
    /// Realized headways.
    pub headway: SampleSummary,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimStats {
    pub label: String,
    pub runs: usize,
    pub warmup_fraction: f64,
    pub seed: u64,
    pub per_station: Vec<StationSimStats>,
}

impl SimStats {
    /// Stats that carry the analytical values with zero error bars, so a
    /// report can be compared against itself.
    pub fn from_report(report: &RouteReport) -> SimStats {
        let summary = |m: Metric, v: Metric| match (m, v) {
            (Metric::Value(mean), Metric::Value(var)) => {
                SampleSummary { count: 1, mean, var, se_mean: 0.0, se_sd: 0.0 }
            }
            _ => SampleSummary::default(),
        };
        let per_station = report
            .per_station
            .iter()
            .map(|m| {
                let h = m.headway.moments();
                StationSimStats {
                    station: m.station,
                    lambda: m.lambda,
                    queue: summary(m.eq, m.varq),
                    wait: summary(m.ew, m.varw),
                    headway: SampleSummary { count: 1, mean: h.mean, var: h.var, se_mean: 0.0, se_sd: 0.0 },
                }
            })
            .collect();
        SimStats { label: report.label.clone(), runs: 0, warmup_fraction: 0.0, seed: 0, per_station }
    }
}

/// What happened when one vehicle served one station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopEvent {
    pub run: usize,
    pub station: usize,
    pub departure: f64,
    pub headway: f64,
    pub load_in: u64,
    pub alighted: u64,
    pub boarded: u64,
    pub load_out: u64,
    /// Queue length when the vehicle arrives, after this headway's arrivals.
    pub queue: usize,
}

pub fn run_simulation(cfg: &SimConfig) -> Result<SimStats> {
    run_simulation_traced(cfg, |_| {})
}

/// [`run_simulation`] with a callback on every vehicle-station event,
/// warmup included.
pub fn run_simulation_traced(cfg: &SimConfig, mut trace: impl FnMut(&StopEvent)) -> Result<SimStats> {
    cfg.validate()?;
    let sc = &cfg.scenario;
    let n_st = sc.station_count();
    let cap = sc.route.capacity as u64;
    let h_adj = sc.adjusted_headway();
    let (gamma, theta) = (sc.incidents.gamma, sc.incidents.theta);

    let mut lambda = Vec::with_capacity(n_st);
    let mut seg = Vec::with_capacity(n_st);
    let mut travel = Vec::with_capacity(n_st);
    for n in 1..=n_st {
        lambda.push(sc.lambda(n)?);
        seg.push(sc.route.segment_time(n)?);
        travel.push(sc.travel_time_to(n)?);
    }

    let warm = cfg.warmup_runs();
    let kept = cfg.runs - warm;
    let batch_of = |l: usize| (l - warm) * BATCHES / kept;

    let mut queue_acc = vec![vec![Welford::default(); BATCHES]; n_st];
    let mut wait_acc = vec![vec![Welford::default(); BATCHES]; n_st];
    let mut head_acc = vec![vec![Welford::default(); BATCHES]; n_st];

    // A virtual vehicle -1 left every station on schedule.
    let mut last_dep: Vec<f64> = travel.iter().map(|t| t - h_adj).collect();
    let mut queues: Vec<VecDeque<f64>> = vec![VecDeque::new(); n_st];
    let mut arrivals = Vec::new();

    for l in 0..cfg.runs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(l as u64);
        let dispatch = l as f64 * h_adj;
        let mut delay = 0.0;
        let mut load = 0u64;
        let record = l >= warm;

        for n in 0..n_st {
            delay += sampling::compound_poisson_exp(&mut rng, gamma * seg[n], theta);
            let t = (dispatch + travel[n] + delay).max(last_dep[n]);
            let prev = last_dep[n];
            let h = t - prev;

            arrivals.clear();
            let k = sampling::poisson(&mut rng, lambda[n] * h);
            arrivals.extend((0..k).map(|_| prev + h * sampling::uniform(&mut rng)));
            arrivals.sort_unstable_by(|a: &f64, b: &f64| a.total_cmp(b));
            let q = &mut queues[n];
            q.extend(arrivals.iter().copied());
            let queue_len = q.len();

            let alighted = sampling::binomial(&mut rng, load, sc.route.stations[n].alpha);
            let load_in = load;
            load -= alighted;
            let boarded = (q.len() as u64).min(cap - load);
            let b = if record { Some(batch_of(l)) } else { None };
            for _ in 0..boarded {
                let a = q.pop_front().unwrap_or(t);
                if let Some(b) = b {
                    wait_acc[n][b].push(t - a);
                }
            }
            load += boarded;
            if let Some(b) = b {
                queue_acc[n][b].push(queue_len as f64);
                head_acc[n][b].push(h);
            }
            last_dep[n] = t;

            trace(&StopEvent {
                run: l,
                station: n + 1,
                departure: t,
                headway: h,
                load_in,
                alighted,
                boarded,
                load_out: load,
                queue: queue_len,
            });
        }
    }

    let per_station = (0..n_st)
        .map(|n| StationSimStats {
            station: n + 1,
            lambda: lambda[n],
            queue: SampleSummary::from_batches(&queue_acc[n]),
            wait: SampleSummary::from_batches(&wait_acc[n]),
            headway: SampleSummary::from_batches(&head_acc[n]),
        })
        .collect();
    Ok(SimStats {
        label: sc.label.clone(),
        runs: cfg.runs,
        warmup_fraction: cfg.warmup_fraction,
        seed: cfg.seed,
        per_station,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tolerances {
    /// Absolute floor for E[Q], passengers.
    pub queue_abs: f64,
    /// Absolute floor for E[W], minutes.
    pub wait_abs: f64,
    /// Relative tolerance on means.
    pub mean_rel: f64,
    /// Relative tolerance on standard deviations.
    pub sd_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { queue_abs: 0.3, wait_abs: 0.2, mean_rel: 0.08, sd_rel: 0.12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RowStatus {
    Pass,
    Fail,
    ExcludedUnstable,
    ExcludedNoArrivals,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Pass => "pass",
            RowStatus::Fail => "fail",
            RowStatus::ExcludedUnstable => "excluded (unstable)",
            RowStatus::ExcludedNoArrivals => "excluded (no arrivals)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonRow {
    pub station: usize,
    /// One of `e_queue`, `sd_queue`, `e_wait`, `sd_wait`.
    pub metric: String,
    pub theory: f64,
    pub sim: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub se: f64,
    pub allowed: f64,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Comparison {
    pub label: String,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.status != RowStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ComparisonRow> {
        self.rows.iter().filter(|r| r.status == RowStatus::Fail)
    }
}

/// Station-by-station gaps between an analytical report and simulation.
pub fn compare(report: &RouteReport, stats: &SimStats, tol: &Tolerances) -> Result<Comparison> {
    if report.per_station.len() != stats.per_station.len() {
        return Err(Error::Mismatch(alloc::format!(
            "{} analytical stations vs {} simulated",
            report.per_station.len(),
            stats.per_station.len()
        )));
    }
    let mut rows = Vec::new();
    for (m, s) in report.per_station.iter().zip(&stats.per_station) {
        let checks = [
            ("e_queue", m.eq, s.queue.mean, s.queue.se_mean, Some(tol.queue_abs), s.queue.count),
            ("sd_queue", m.sd_queue(), s.queue.sd(), s.queue.se_sd, None, s.queue.count),
            ("e_wait", m.ew, s.wait.mean, s.wait.se_mean, Some(tol.wait_abs), s.wait.count),
            ("sd_wait", m.sd_wait(), s.wait.sd(), s.wait.se_sd, None, s.wait.count),
        ];
        for (name, theory, sim, se, floor, count) in checks {
            let mut row = ComparisonRow {
                station: m.station,
                metric: name.into(),
                theory: f64::NAN,
                sim,
                abs_gap: f64::NAN,
                rel_gap: f64::NAN,
                se,
                allowed: f64::NAN,
                status: RowStatus::Pass,
            };
            let th = match theory {
                Metric::Unbounded => {
                    row.theory = f64::INFINITY;
                    row.status = RowStatus::ExcludedUnstable;
                    rows.push(row);
                    continue;
                }
                Metric::NotApplicable => {
                    row.status = RowStatus::ExcludedNoArrivals;
                    rows.push(row);
                    continue;
                }
                Metric::Value(v) => v,
            };
            if !m.stable {
                row.theory = th;
                row.status = RowStatus::ExcludedUnstable;
                rows.push(row);
                continue;
            }
            if count == 0 {
                row.theory = th;
                row.status = RowStatus::ExcludedNoArrivals;
                rows.push(row);
                continue;
            }
            let gap = (th - sim).abs();
            let rel = if th != 0.0 { gap / th.abs() } else if gap == 0.0 { 0.0 } else { f64::INFINITY };
            let allowed = match floor {
                Some(f) => f.max(tol.mean_rel * th.abs()),
                None => tol.sd_rel * th.abs(),
            };
            row.theory = th;
            row.abs_gap = gap;
            row.rel_gap = rel;
            row.allowed = allowed;
            row.status = if gap <= allowed { RowStatus::Pass } else { RowStatus::Fail };
            rows.push(row);
        }
    }
    Ok(Comparison { label: report.label.clone(), rows })
}
