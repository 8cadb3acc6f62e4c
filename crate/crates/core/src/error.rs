use thiserror::Error;

/// Errors raised while building complexes, sheaves and operators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("edge ({u}, {v}) references a vertex outside [0, {vertex_count})")]
    VertexOutOfRange { u: usize, v: usize, vertex_count: usize },

    #[error("{face:?} is not a codimension-1 face of {cell:?}")]
    NotIncident { cell: Vec<usize>, face: Vec<usize> },

    #[error("complex already carries a cone apex")]
    AlreadyConed,

    #[error("feature matrix for vertex {0} is empty")]
    EmptyFeatures(usize),

    #[error("feature matrix for vertex {0} contains non-finite entries")]
    NonFiniteFeatures(usize),

    #[error("no feature matrix supplied for vertex {0}")]
    MissingFeatures(usize),

    #[error("ambient dimension mismatch: {0} vs {1}")]
    AmbientMismatch(usize, usize),

    #[error("twist on edge ({0}, {1}) is not orthogonal")]
    NonOrthogonalTwist(usize, usize),

    #[error("cycle length must be at least {min}, got {n}")]
    TooSmall { n: usize, min: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degree {0} is out of range")]
    DegreeOutOfRange(i32),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("delta must be non-negative, got {0}")]
    NegativeDelta(f64),

    #[error("operator is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("witness window requires delta0 < delta1, got ({0}, {1})")]
    InvalidWindow(f64, f64),

    #[error("grounding mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("serialization: {0}")]
    Serde(String),

    #[error("malformed JSON at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("unsupported document: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
