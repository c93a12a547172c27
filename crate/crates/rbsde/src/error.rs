use thiserror::Error;

use crate::processes::Slot;

/// Errors surfaced by tree construction, solvers and oracles.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid stopping rule: {0}")]
    InvalidRule(String),

    #[error("incomplete section: no value for node {node} at level {level}")]
    IncompleteSection { node: usize, level: usize },

    #[error("non-monotone thresholds at index {index}")]
    NonMonotoneThresholds { index: usize },

    #[error("oracle size limit: {required} rules exceed budget {budget}")]
    OracleSizeLimit { required: u128, budget: u128 },

    #[error("unbounded generator step: bracket expansion exceeded {limit:e} at t={t}")]
    UnboundedGeneratorStep { t: f64, limit: f64 },

    #[error("generator not nonincreasing in y: f({t}, {y_lo}) = {f_lo} < f({t}, {y_hi}) = {f_hi}")]
    NonMonotoneGenerator {
        t: f64,
        y_lo: f64,
        y_hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("Moreau scheme requires declared lower bound")]
    MissingLowerBound,

    #[error("not a supermartingale: violation {violation} at node {node}, slot {slot}")]
    NotSupermartingale {
        node: usize,
        slot: Slot,
        violation: f64,
    },

    #[error("stopping rules not ordered: first rule exceeds second on node {node}")]
    RulesNotOrdered { node: usize },

    #[error("separation violation: {what} at node {node}, slot {slot} (gap {gap})")]
    SeparationViolation {
        what: String,
        node: usize,
        slot: Slot,
        gap: f64,
    },

    #[error("solver did not converge after {iterations} iterations (gap {gap:e}, tol {tol:e})")]
    NonConvergence {
        iterations: usize,
        gap: f64,
        tol: f64,
    },

    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("expression: {0}")]
    Expression(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 validation, 3 non-convergence, 4 budget.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } | Error::UnboundedGeneratorStep { .. } => 3,
            Error::OracleSizeLimit { .. } => 4,
            _ => 2,
        }
    }
}
