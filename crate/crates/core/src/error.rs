use thiserror::Error;

/// Errors raised by grid construction, assembly, the eigensolver and the
/// symmetry transforms.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain has no inside cells at this resolution")]
    EmptyDomain,

    #[error("half-space is not compatible with the lattice: {0}")]
    Compatibility(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("{cells} inside cells exceed the dense limit of {limit}; reduce n")]
    TooLarge { cells: usize, limit: usize },

    #[error("energy form is not coercive (smallest eigenvalue {min_eig:e})")]
    NotCoercive { min_eig: f64 },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("no positive direction: largest pencil eigenvalue is {mu:e}")]
    NoPositiveDirection { mu: f64 },

    #[error("weighted mass must be positive, got {0:e}")]
    Denominator(f64),

    #[error("first eigenvector is not strictly positive (min entry {min:e})")]
    Positivity { min: f64 },

    #[error("field must be nonnegative (cell {cell} has value {value:e})")]
    NegativeField { cell: usize, value: f64 },

    #[error("unsupported domain shape: {0}")]
    DomainShape(String),

    #[error("invalid weight specification: {0}")]
    Spec(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable snake-case name of the variant, used in machine-readable output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::EmptyDomain => "empty_domain",
            Error::Compatibility(_) => "compatibility",
            Error::Shape { .. } => "shape",
            Error::TooLarge { .. } => "too_large",
            Error::NotCoercive { .. } => "not_coercive",
            Error::Assumption(_) => "assumption",
            Error::NoPositiveDirection { .. } => "no_positive_direction",
            Error::Denominator(_) => "denominator",
            Error::Positivity { .. } => "positivity",
            Error::NegativeField { .. } => "negative_field",
            Error::DomainShape(_) => "domain_shape",
            Error::Spec(_) => "spec",
        }
    }
}
