use std::fmt;

use crate::grid::Ambient;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which mathematical check raised a falsification event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    GeneralisedVonNeumann,
    Dichotomy,
    ParsevalBound,
    TechnicalLemma,
    Dirichlet,
    Annihilation,
    AnnihilatingProgression,
    LinftyIncrement,
    Pigeonhole,
    Increment,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Check::GeneralisedVonNeumann => "generalised von Neumann",
            Check::Dichotomy => "main dichotomy",
            Check::ParsevalBound => "parseval bound",
            Check::TechnicalLemma => "technical lemma",
            Check::Dirichlet => "dirichlet approximation",
            Check::Annihilation => "annihilation",
            Check::AnnihilatingProgression => "annihilating progression",
            Check::LinftyIncrement => "vertical L-infinity increment",
            Check::Pigeonhole => "pigeonholing",
            Check::Increment => "density increment",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside {ambient}")]
    Coordinate { x: i64, y: i64, ambient: Ambient },

    #[error("duplicate point ({x}, {y})")]
    Duplicate { x: i64, y: i64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("expected {expected} ambient, got {found}")]
    AmbientMismatch { expected: &'static str, found: Ambient },

    #[error("unsupported size: {0}")]
    Capability(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("floating-point residue {residue:e} exceeds {tolerance:e}; use the exact counting path")]
    Precision { residue: f64, tolerance: f64 },

    #[error("numerical inconsistency: {0}")]
    Inconsistent(String),

    #[error("falsification event ({check}): {detail}")]
    Falsification { check: Check, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn falsified(check: Check, detail: impl Into<String>) -> Self {
        Error::Falsification {
            check,
            detail: detail.into(),
        }
    }

    pub fn is_falsification(&self) -> bool {
        matches!(self, Error::Falsification { .. })
    }
}
