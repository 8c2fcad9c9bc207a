use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid alphabet `{name}`: {reason}")]
    InvalidAlphabet { name: String, reason: String },

    #[error("unknown axis `{0}`")]
    UnknownAxis(String),

    #[error("axis `{0}` appears more than once")]
    DuplicateAxis(String),

    #[error("dangling dependency: axis `{0}` is required before it is produced")]
    DanglingDependency(String),

    #[error("table has {got} cells, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("negative probability {value} at cell {cell}")]
    NegativeMass { cell: usize, value: f64 },

    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("axis sets overlap on `{0}`")]
    OverlappingSets(String),

    #[error("cannot condition: all mass lies on zero-marginal rows")]
    ZeroMarginal,

    #[error("kernel row {row} is absent but reached with positive mass")]
    AbsentRow { row: usize },

    #[error("factorization `{factorization}` violated: {detail}")]
    ChainMismatch {
        factorization: String,
        detail: String,
    },

    #[error("B' membership fails for q={q}: {entry} = {value} exceeds rho*(S1,S2) = {limit}")]
    BprimeViolation {
        q: String,
        entry: String,
        value: f64,
        limit: f64,
    },

    #[error("alphabet `{axis}` has {size} symbols, at most {max} allowed")]
    Cardinality {
        axis: String,
        size: usize,
        max: usize,
    },

    #[error("Jacobi SVD did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("grid step {0} does not divide 1")]
    InvalidStep(f64),

    #[error("search space has no feasible grid point")]
    EmptyFeasibleSet,

    #[error("preimage map undefined: {0}")]
    NonDeterministic(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn chain(factorization: &str, detail: impl Into<String>) -> Self {
        Error::ChainMismatch {
            factorization: factorization.to_string(),
            detail: detail.into(),
        }
    }
}
