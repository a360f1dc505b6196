use thiserror::Error;

/// Errors raised by the landscape computations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration length {0} is not a multiple of 3")]
    BadLength(usize),
    #[error("particles {0} and {1} coincide")]
    CoincidentParticles(usize, usize),
    #[error("invalid bond {0}-{1}")]
    InvalidBond(usize, usize),
    #[error("configuration is collinear; rigid-body basis is rank deficient")]
    Collinear,
    #[error("singular constraint set: expected {expected} non-zero modes, found {found}")]
    Singular { expected: usize, found: usize },
    #[error("projection did not converge (residual {residual:.3e} after {iterations} iterations)")]
    ProjectionFailed { residual: f64, iterations: usize },
    #[error("graph could not be realized after {0} restarts")]
    Unrealizable(usize),
    #[error("multiplicity is not an integer: {0}")]
    NonIntegerMultiplicity(f64),
    #[error("line closes on itself without reaching a new rigid cluster")]
    ClosedLine,
    #[error("trace failed: {0}")]
    Trace(String),
    #[error("endpoint graph is not in the rigid catalog")]
    UnknownEndpoint,
    #[error("boundary did not close after {0} edges")]
    Topology(usize),
    #[error("parameterization failed: {0}")]
    Parameterization(String),
    #[error("mesh quality: {0}")]
    Quality(String),
    #[error("no root in bracket [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("potential has no interior minimum")]
    PotentialShape,
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
    #[error("missing input: {0}")]
    Missing(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
