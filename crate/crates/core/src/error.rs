//! Error type shared by every module of the crate.

use std::fmt;

use thiserror::Error;

/// A single invariant violation found while validating parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// The named field must be strictly positive.
    NonPositiveValue(&'static str),
    /// The named field must be finite.
    NonFinite(&'static str),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveValue(name) => write!(f, "{name} must be > 0"),
            Violation::NonFinite(name) => write!(f, "{name} must be finite"),
        }
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join(.0))]
    Invalid(Vec<Violation>),

    #[error("{name} = {value} is outside [{lo}, {hi})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("phase-shift ratio {0} is outside [0, 0.25]")]
    PhaseOutOfRange(f64),

    #[error("operating point D = {0} gives zero small-signal gain")]
    DegenerateOperatingPoint(f64),

    #[error("state became non-finite at t = {t:e} s")]
    NonFinite { t: f64 },

    #[error("no periodic steady state after {0} cycles")]
    NoConvergence(usize),

    #[error("{failed} sweep point(s) failed, first at {first}")]
    SweepFailed { failed: usize, first: String },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::NoConvergence(_) | Error::SweepFailed { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
