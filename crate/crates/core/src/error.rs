use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("vertices {0} and {1} are not connected")]
    Disconnected(usize, usize),

    #[error("query at ({vertex}, {time}) coincides with a transition")]
    OnTransition { vertex: usize, time: f64 },

    #[error("a transition already occupies ({vertex}, {time})")]
    TimeCollision { vertex: usize, time: f64 },

    #[error("no transition with id {0}")]
    InvalidTransitionId(usize),

    #[error("no loop with id {0}")]
    InvalidLoopId(usize),

    #[error("Hilbert space dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("operator is not Hermitian (residual {0:e})")]
    NotHermitian(f64),

    #[error("no probabilistic representation: {0}")]
    NoRepresentation(String),

    #[error("momentum {0:?} is not on the dual lattice")]
    OffDualLattice(Vec<f64>),

    #[error("quadrature target missed: {what} (error estimate {estimate:e}, target {target:e})")]
    QuadratureTarget { what: String, estimate: f64, target: f64 },

    #[error("invariant violated at step {step}: {what}")]
    Invariant { step: u64, what: String },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("observer failed: {0}")]
    Observer(String),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
