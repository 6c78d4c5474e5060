use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::model::Violation;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid scenario: {}", join(.0))]
    InvalidScenario(Vec<Violation>),

    #[error("station {station} out of range (line has {count} stations)")]
    StationOutOfRange { station: usize, count: usize },

    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),

    #[error("value {value} is not valid for parameter `{param}`")]
    InvalidSweepValue { param: &'static str, value: f64 },

    #[error("{0}")]
    Domain(&'static str),

    #[error("capacity distribution has no mass above the trimming threshold")]
    EmptyCapacity,

    #[error("negative probability {value:e} at index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("root search found {found} of {expected} roots")]
    RootSearch { found: usize, expected: usize },

    #[error("station {station} is unstable (rho = {rho})")]
    Unstable { station: usize, rho: f64 },

    #[error("station {station}: {source}")]
    AtStation { station: usize, source: Box<Error> },

    #[error("{0}")]
    InvalidSimulation(&'static str),

    #[error("reports do not line up: {0}")]
    Mismatch(String),
}

impl Error {
    pub(crate) fn at(self, station: usize) -> Error {
        match self {
            e @ Error::AtStation { .. } => e,
            e => Error::AtStation { station, source: Box::new(e) },
        }
    }

    /// The underlying error with any station annotation peeled off.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::AtStation { source, .. } => source.root_cause(),
            e => e,
        }
    }

    pub fn is_validation(&self) -> bool {
        matches!(
            self.root_cause(),
            Error::InvalidScenario(_)
                | Error::StationOutOfRange { .. }
                | Error::UnknownParameter(_)
                | Error::InvalidSweepValue { .. }
                | Error::Domain(_)
                | Error::InvalidSimulation(_)
                | Error::Mismatch(_)
        )
    }
}

fn join(v: &[Violation]) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        let _ = write!(out, "{x}");
    }
    out
}
