//! Scenario schema, validation and derived planning quantities.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StationParams {
    /// Passenger arrival rate, passengers/min.
    pub lambda: f64,
    /// Probability that an on-board passenger alights here.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RouteConfig {
    pub stations: Vec<StationParams>,
    /// Minutes between consecutive stations. Ignored when `segment_times` is set.
    pub interstation_time: f64,
    /// Optional per-segment travel times; segment `i` ends at station `i + 1`.
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub segment_times: Option<Vec<f64>>,
    pub cycle_time: f64,
    pub nominal_headway: f64,
    pub capacity: usize,
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub demand_factor: f64,
}

#[cfg(feature = "serde")]
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IncidentParams {
    /// Incident occurrence rate per minute of travel.
    pub gamma: f64,
    /// Rate of the exponential incident duration.
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub route: RouteConfig,
    pub incidents: IncidentParams,
    #[cfg_attr(feature = "serde", serde(default))]
    pub label: String,
}

/// One broken invariant. `path` locates the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

const REFERENCE_LAMBDA: [f64; 10] = [0.75, 1.5, 0.75, 3.0, 1.5, 1.0, 0.75, 0.5, 0.2, 0.0];
const REFERENCE_ALPHA: [f64; 10] = [0.0, 0.0, 0.1, 0.25, 0.25, 0.8, 0.5, 0.1, 0.75, 1.0];

impl Scenario {
    /// The ten-station example line with H̄ = 6 min.
    pub fn reference() -> Scenario {
        let stations = REFERENCE_LAMBDA
            .iter()
            .zip(REFERENCE_ALPHA.iter())
            .map(|(&lambda, &alpha)| StationParams { lambda, alpha })
            .collect();
        Scenario {
            route: RouteConfig {
                stations,
                interstation_time: 5.0,
                segment_times: None,
                cycle_time: 100.0,
                nominal_headway: 6.0,
                capacity: 34,
                demand_factor: 0.8,
            },
            incidents: IncidentParams { gamma: 0.2, theta: 1.0 },
            label: "reference".to_string(),
        }
    }

    /// Same line with H̄ = 4 min.
    pub fn reference_h4() -> Scenario {
        let mut s = Scenario::reference();
        s.route.nominal_headway = 4.0;
        s.label = "reference-h4".to_string();
        s
    }

    /// Named presets: `reference`, `reference-h6` (alias) and `reference-h4`.
    pub fn preset(name: &str) -> Option<Scenario> {
        match name {
            "reference" | "reference-h6" => Some(Scenario::reference()),
            "reference-h4" => Some(Scenario::reference_h4()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }

    pub fn station_count(&self) -> usize {
        self.route.stations.len()
    }

    /// Effective arrival rate at station `n` (1-based), demand factor applied.
    pub fn lambda(&self, n: usize) -> Result<f64> {
        self.check_station(n)?;
        Ok(self.route.stations[n - 1].lambda * self.route.demand_factor)
    }

    pub fn fleet_size(&self) -> f64 {
        self.route.cycle_time / self.route.nominal_headway
    }

    pub fn travel_time_to(&self, n: usize) -> Result<f64> {
        self.route.travel_time_to(n)
    }

    pub fn adjusted_headway(&self) -> f64 {
        adjusted_headway(self)
    }

    fn check_station(&self, n: usize) -> Result<()> {
        let count = self.station_count();
        if n == 0 || n > count {
            return Err(Error::StationOutOfRange { station: n, count });
        }
        Ok(())
    }
}

impl RouteConfig {
    /// Incident-free travel time from the hub to station `n` (1-based).
    pub fn travel_time_to(&self, n: usize) -> Result<f64> {
        let count = self.stations.len();
        if n == 0 || n > count {
            return Err(Error::StationOutOfRange { station: n, count });
        }
        Ok(match &self.segment_times {
            Some(seg) => seg[..n].iter().sum(),
            None => n as f64 * self.interstation_time,
        })
    }

    /// Travel time of the segment ending at station `n`.
    pub fn segment_time(&self, n: usize) -> Result<f64> {
        let count = self.stations.len();
        if n == 0 || n > count {
            return Err(Error::StationOutOfRange { station: n, count });
        }
        Ok(match &self.segment_times {
            Some(seg) => seg[n - 1],
            None => self.interstation_time,
        })
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

pub fn validate(sc: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |path: String, message: &str| {
        out.push(Violation { path, message: message.to_string() });
    };
    let r = &sc.route;

    if r.stations.is_empty() {
        bad("route.stations".into(), "at least one station is required");
    }
    for (i, st) in r.stations.iter().enumerate() {
        let n = i + 1;
        if !(st.lambda.is_finite() && st.lambda >= 0.0) {
            bad(format!("station {n} lambda"), "lambda must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&st.alpha) {
            bad(format!("station {n} alpha"), "alpha must lie in [0, 1]");
        }
    }
    match &r.segment_times {
        Some(seg) => {
            if seg.len() != r.stations.len() {
                bad(
                    "route.segment_times".into(),
                    "segment_times must have one entry per station",
                );
            }
            for (i, &t) in seg.iter().enumerate() {
                if !positive(t) {
                    bad(format!("route.segment_times[{i}]"), "segment time must be positive");
                }
            }
        }
        None => {
            if !positive(r.interstation_time) {
                bad("route.interstation_time".into(), "interstation_time must be positive");
            }
        }
    }
    if !positive(r.cycle_time) {
        bad("route.cycle_time".into(), "cycle_time must be positive");
    }
    if !positive(r.nominal_headway) {
        bad("route.nominal_headway".into(), "nominal_headway must be positive");
    }
    if r.capacity == 0 {
        bad("route.capacity".into(), "capacity must be at least 1");
    }
    if !positive(r.demand_factor) {
        bad("route.demand_factor".into(), "demand_factor must be positive");
    }
    if !(sc.incidents.gamma.is_finite() && sc.incidents.gamma >= 0.0) {
        bad("incidents.gamma".into(), "gamma must be finite and >= 0");
    }
    if !positive(sc.incidents.theta) {
        bad("incidents.theta".into(), "theta must be positive");
    }

    // Only meaningful once the pieces it depends on are sane.
    if out.is_empty() {
        let n = r.stations.len();
        let total = r.travel_time_to(n).unwrap_or(f64::NAN);
        if !(total <= r.cycle_time / 2.0) {
            out.push(Violation {
                path: "route".into(),
                message: format!(
                    "travel time to the last station ({total}) exceeds half the cycle time ({})",
                    r.cycle_time / 2.0
                ),
            });
        }
    }
    out
}

/// Validate and return the scenario, or every violation as one error.
pub fn ensure_valid(sc: &Scenario) -> Result<()> {
    let v = validate(sc);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidScenario(v))
    }
}

/// Mean compound incident delay accumulated over travel time `t`.
pub fn incident_duration_mean(gamma: f64, theta: f64, t: f64) -> f64 {
    gamma * t / theta
}

/// H̄ + 2 E[I⁽ᴺ⁾] / F̄.
pub fn adjusted_headway(sc: &Scenario) -> f64 {
    let n = sc.station_count();
    let t_n = sc.route.travel_time_to(n).unwrap_or(0.0);
    let ei = incident_duration_mean(sc.incidents.gamma, sc.incidents.theta, t_n);
    sc.route.nominal_headway + 2.0 * ei / sc.fleet_size()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    Capacity,
    Gamma,
    Theta,
    NominalHeadway,
    DemandFactor,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] = [
        SweepParam::Capacity,
        SweepParam::Gamma,
        SweepParam::Theta,
        SweepParam::NominalHeadway,
        SweepParam::DemandFactor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Capacity => "capacity",
            SweepParam::Gamma => "gamma",
            SweepParam::Theta => "theta",
            SweepParam::NominalHeadway => "nominal_headway",
            SweepParam::DemandFactor => "demand_factor",
        }
    }

    pub fn get(self, sc: &Scenario) -> f64 {
        match self {
            SweepParam::Capacity => sc.route.capacity as f64,
            SweepParam::Gamma => sc.incidents.gamma,
            SweepParam::Theta => sc.incidents.theta,
            SweepParam::NominalHeadway => sc.route.nominal_headway,
            SweepParam::DemandFactor => sc.route.demand_factor,
        }
    }

    fn apply(self, sc: &mut Scenario, value: f64) -> Result<()> {
        match self {
            SweepParam::Capacity => {
                if !(value >= 1.0 && libm::trunc(value) == value && value < 1e9) {
                    return Err(Error::InvalidSweepValue { param: self.name(), value });
                }
                sc.route.capacity = value as usize;
            }
            SweepParam::Gamma => sc.incidents.gamma = value,
            SweepParam::Theta => sc.incidents.theta = value,
            SweepParam::NominalHeadway => sc.route.nominal_headway = value,
            SweepParam::DemandFactor => sc.route.demand_factor = value,
        }
        Ok(())
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "capacity" | "C" => Ok(SweepParam::Capacity),
            "gamma" => Ok(SweepParam::Gamma),
            "theta" => Ok(SweepParam::Theta),
            "nominal_headway" | "headway" => Ok(SweepParam::NominalHeadway),
            "demand_factor" | "demand" => Ok(SweepParam::DemandFactor),
            other => Err(Error::UnknownParameter(other.to_string())),
        }
    }
}

/// One scenario per value with `param` replaced; everything else is copied.
pub fn expand_grid(base: &Scenario, param: SweepParam, values: &[f64]) -> Result<Vec<Scenario>> {
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let mut sc = base.clone();
        param.apply(&mut sc, v)?;
        sc.label = format!("{}[{}={}]", base.label, param.name(), v);
        out.push(sc);
    }
    Ok(out)
}

/// Like [`expand_grid`] but takes the parameter by name.
pub fn expand_grid_named(base: &Scenario, param: &str, values: &[f64]) -> Result<Vec<Scenario>> {
    expand_grid(base, param.parse()?, values)
}

/// The full value space of the sensitivity study, one-at-a-time around `base`.
pub fn sensitivity_grid(base: &Scenario) -> Vec<(SweepParam, Vec<f64>)> {
    vec![
        (SweepParam::Capacity, vec![30.0, 34.0, 38.0]),
        (SweepParam::Gamma, vec![0.0, 0.1, 0.2, 1.0 / 3.0]),
        (SweepParam::Theta, vec![2.0, 1.0, 0.5]),
        (SweepParam::NominalHeadway, vec![2.0, 4.0, 7.0]),
        (SweepParam::DemandFactor, vec![0.2, 0.4, 0.6, 0.8, 1.0]),
    ]
    .into_iter()
    .map(|(p, mut v)| {
        if !v.contains(&p.get(base)) {
            v.push(p.get(base));
        }
        (p, v)
    })
    .collect()
}
