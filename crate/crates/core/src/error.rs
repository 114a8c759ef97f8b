use std::fmt;

use thiserror::Error;

use crate::funcspace::Cube;

/// Why an evaluation left the domain of a function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    DivisionByZero,
    LogNonPositive,
    SqrtNegative,
    NonFinite,
    MissingCoordinate,
    NonPositiveWeight,
    OutsideCoverage,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::LogNonPositive => "log of a non-positive number",
            DomainKind::SqrtNegative => "sqrt of a negative number",
            DomainKind::NonFinite => "non-finite result",
            DomainKind::MissingCoordinate => "point has too few coordinates",
            DomainKind::NonPositiveWeight => "weight is not positive",
            DomainKind::OutsideCoverage => "point outside the covered region",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainError {
    pub kind: DomainKind,
    pub point: Vec<f64>,
}

impl DomainError {
    pub fn new(kind: DomainKind, point: &[f64]) -> Self {
        DomainError {
            kind,
            point: point.to_vec(),
        }
    }
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {:?}", self.kind, self.point)
    }
}

impl std::error::Error for DomainError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at position {pos}: expected one of [{}], found {found}", expected.join(", "))]
    Syntax {
        pos: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("`{func}` takes {expected} argument(s), got {found} (position {pos})")]
    Arity {
        func: String,
        expected: usize,
        found: usize,
        pos: usize,
    },
    #[error("domain error: {0}")]
    Domain(#[from] DomainError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{stage}: condition not met on scanned region (witness cube {witness:?}, oscillation {value} >= bound {bound})")]
    ConditionNotMet {
        stage: String,
        witness: Cube,
        value: f64,
        bound: f64,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
