use std::fmt;

use thiserror::Error;

use crate::rat::Rat;

/// Malformed textual input (rational literal, formula, model file).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub message: String,
}

impl ParseError {
    pub fn new(message: impl Into<String>) -> Self {
        ParseError { message: message.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error: {}", self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("nonlinear term `{0}` is outside linear real arithmetic")]
    Nonlinear(String),

    #[error("variable `{0}` is bound by a quantifier and cannot be substituted")]
    BoundVariable(String),

    #[error("variable `{0}` has no value")]
    UnboundVariable(String),

    #[error("variable `{0}` is quantified twice on the same path")]
    Rebound(String),

    #[error("formula still contains quantifiers")]
    Quantified,

    #[error("cell is unbounded in `{0}`")]
    Unbounded(String),

    #[error("domain is not compact: {0}")]
    NonCompact(String),

    #[error("unsupported instance: {0}")]
    Unsupported(String),

    #[error("candidate regions leave [{lo}, {hi}] uncovered near v0 = {at}: union of candidate regions must equal the stable interval")]
    CoverageGap { lo: Rat, hi: Rat, at: String },

    #[error("no admissible (L, U) pair on the grid")]
    NoAdmissiblePair,

    #[error("invalid model: {0}")]
    Model(String),

    #[error("deviation margin {exact} is not strictly below the declared bound {declared}")]
    MarginViolated { exact: Rat, declared: Rat },

    #[error("cycle {cycle}: measured v0 = {v0} is not covered by any controller piece")]
    ControllerSelection { cycle: usize, v0: Rat },

    #[error("no feasible switching schedule on the grid for v0 = {0}")]
    OracleInfeasible(Rat),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
