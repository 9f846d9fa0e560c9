use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("function `{name}` takes {expected} argument(s), got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("derivative `{derivative}` of field `{field}` was requested but not declared")]
    MissingDerivative { field: String, derivative: String },

    #[error("field `{field}` = {value} at {point:?} violates its declared bounds [{lo}, {hi}]")]
    ConstraintViolation {
        field: String,
        point: [f64; 3],
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("background flow is not tangential at {point:?}: n.b = {value}")]
    BoundaryFlowViolation { point: [f64; 3], value: f64 },
    #[error("declared derivative `{field}` disagrees with finite differences at {point:?} (declared {declared}, fd {estimate})")]
    InconsistentDerivative {
        field: String,
        point: [f64; 3],
        declared: f64,
        estimate: f64,
    },
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("unsupported polynomial degree {0} (supported: 1, 2)")]
    UnsupportedDegree(usize),
    #[error("field violates the normal constraint at node {node} (component {component}, value {value})")]
    NodalConstraintViolation {
        node: usize,
        component: usize,
        value: f64,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank decision is ambiguous near the cutoff {cutoff:e} (gap ratio {gap_ratio:.3}); spectrum tail {tail:?}")]
    CutoffAmbiguous {
        cutoff: f64,
        gap_ratio: f64,
        tail: Vec<f64>,
    },
    #[error("decomposition bases are ill-conditioned (Gramian condition number {0:e})")]
    IllConditionedBases(f64),
    #[error("subspace V_h is empty")]
    EmptySubspace,

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("missing C_reg value: case App-a was requested without one")]
    MissingCreg,

    #[error("solver breakdown: {0}")]
    SolverBreakdown(String),
    #[error("system matrix is singular: {0}")]
    SingularMatrix(String),
    #[error("gravity block is singular: {0}")]
    SingularGravityBlock(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SolverBreakdown(_) | Error::SingularMatrix(_) | Error::SingularGravityBlock(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "Syntax",
            Error::UnknownIdentifier { .. } => "UnknownIdentifier",
            Error::ArityMismatch { .. } => "ArityMismatch",
            Error::MissingDerivative { .. } => "MissingDerivative",
            Error::ConstraintViolation { .. } => "ConstraintViolation",
            Error::BoundaryFlowViolation { .. } => "BoundaryFlowViolation",
            Error::InconsistentDerivative { .. } => "InconsistentDerivative",
            Error::Config(_) => "Config",
            Error::InvalidRange(_) => "InvalidRange",
            Error::UnsupportedDegree(_) => "UnsupportedDegree",
            Error::NodalConstraintViolation { .. } => "ConstraintViolation",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::CutoffAmbiguous { .. } => "CutoffAmbiguous",
            Error::IllConditionedBases(_) => "IllConditionedBases",
            Error::EmptySubspace => "EmptySubspace",
            Error::PreconditionViolated(_) => "PreconditionViolated",
            Error::MissingCreg => "MissingCreg",
            Error::SolverBreakdown(_) => "SolverBreakdown",
            Error::SingularMatrix(_) => "SingularMatrix",
            Error::SingularGravityBlock(_) => "SingularGravityBlock",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
