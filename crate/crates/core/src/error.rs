use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution parameters: {0}")]
    InvalidDistribution(String),

    #[error("transition matrix is not row-stochastic: {0}")]
    NonStochastic(String),

    #[error("supplied stationary vector does not satisfy pi P = pi (defect {defect:e})")]
    StationaryMismatch { defect: f64 },

    #[error("environment length must be at least 1")]
    EmptyEnvironment,

    #[error("unknown excitation family `{0}`")]
    UnknownFamily(String),

    #[error("excitation family `{family}`: {reason}")]
    InvalidExcitation { family: String, reason: String },

    #[error("environment has {available} values but {required} are needed")]
    EnvironmentTooShort { required: usize, available: usize },

    #[error("path has {available} steps but {required} are needed")]
    PathTooShort { required: usize, available: usize },

    #[error("visit counts are inconsistent with positions at step {step}")]
    InconsistentVisitCounts { step: usize },

    #[error("path is not nearest-neighbour at step {step}")]
    NotNearestNeighbour { step: usize },

    #[error("scale n = {n} does not exceed the squared bound {bound_sq}; some factors may be clamped")]
    ClampingActive { n: usize, bound_sq: f64 },

    #[error("enumeration limited to {max} steps, got {steps}")]
    TooManySteps { steps: usize, max: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {required} values, got {got}")]
    TooFewValues { required: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("experiment misconfigured: {0}")]
    Misconfigured(String),
}

pub type Result<T> = std::result::Result<T, Error>;
