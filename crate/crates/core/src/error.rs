use thiserror::Error;

/// Errors raised by the solvers, samplers and interval constructions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("covariance not SPD")]
    CovarianceNotSpd,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("GLS undefined; use constrained_lsq or polytope faces")]
    GlsUndefined,

    #[error("slice infeasible: mu = {mu} outside the functional range of X")]
    SliceInfeasible { mu: f64 },

    #[error("QP failed after {iterations} iterations (primal residual {primal:.3e}, dual residual {dual:.3e}, gap {gap:.3e})")]
    QpFailed {
        iterations: usize,
        primal: f64,
        dual: f64,
        gap: f64,
    },

    #[error("empty feasible region")]
    EmptyFeasibleRegion,

    #[error("empty Berger–Boos set")]
    EmptyBergerBoosSet,

    #[error("unbounded support")]
    UnboundedSupport,

    #[error("Berger–Boos set unbounded; no bounded confidence set")]
    UnboundedBergerBoosSet,

    #[error("unbounded functional over Berger–Boos set")]
    UnboundedFunctional,

    #[error("empty polytope")]
    EmptyPolytope,

    #[error("degenerate polytope")]
    DegeneratePolytope,

    #[error("invalid walk state")]
    InvalidWalkState,

    #[error("VGS acceptance too low; use polytope sampler")]
    VgsAcceptanceTooLow,

    #[error("importance-like acceptance too low")]
    ImportanceAcceptanceTooLow,

    #[error("study aborted: {failed} of {replications} replications failed")]
    StudyAborted { failed: usize, replications: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for the errors that mean "no bounded confidence set exists".
    pub fn is_unbounded(&self) -> bool {
        matches!(
            self,
            Error::UnboundedSupport | Error::UnboundedBergerBoosSet | Error::UnboundedFunctional
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
