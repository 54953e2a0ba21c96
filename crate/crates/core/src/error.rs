use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expression parse error at byte {pos}: {msg}")]
    Parse { msg: String, pos: usize },

    #[error("problem file: {0}")]
    ProblemFile(String),

    #[error("unknown catalog problem '{name}' (available: {available})")]
    UnknownProblem { name: String, available: String },

    #[error("audit failure: {map} is not finite at {point}")]
    NonFiniteMap { map: String, point: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator assembly: non-finite coefficient {entry} at {location}")]
    Assembly { entry: String, location: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry {what} at {location}")]
    NonFiniteEntry { what: String, location: String },

    #[error("malformed field file: {0}")]
    MalformedField(String),

    #[error(
        "Newton failed at time step {step}: residual {residual:e} after {iterations} iterations"
    )]
    NewtonDivergence {
        step: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("state became non-finite at time step {step}")]
    NonFiniteState { step: usize },

    #[error("singular step matrix at time step {step} (pivot {pivot:e}); try a smaller time step")]
    SingularStep { step: usize, pivot: f64 },

    #[error("no root of g in u at (x={x:?}, t={t}, y={y}) within 60 bracket doublings")]
    NoRoot { x: Vec<f64>, t: f64, y: f64 },

    #[error("pointwise subproblem failed at (x={x:?}, t={t}, y={y}, phi={phi})")]
    PointwiseFailure {
        x: Vec<f64>,
        t: f64,
        y: f64,
        phi: f64,
    },

    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    #[error("critical direction rejected: {0}")]
    DirectionRejected(String),

    #[error("dense oracle size guard: {vars} variables exceeds {limit}")]
    SizeGuard { vars: usize, limit: usize },

    #[error("oracle NLP failure: {0}")]
    Nlp(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
