use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid Bloch state: length {length} exceeds 1 + tolerance")]
    InvalidState { length: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("degenerate direction: {0}")]
    Degenerate(&'static str),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration failure at step {step} (t = {time}): {detail}")]
    IntegrationFailure { step: usize, time: f64, detail: String },

    #[error("noise channel mismatch: model A uses {a} channels, model B uses {b}")]
    ChannelMismatch { a: usize, b: usize },

    #[error("positivity violation: minimum eigenvalue {min_eigenvalue:.3e}")]
    PositivityViolation { min_eigenvalue: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("stability bound violated: dt = {dt:.3e} exceeds {bound:.3e}")]
    StabilityViolation { dt: f64, bound: f64 },

    #[error("no convergence within horizon {horizon}")]
    NoConvergence { horizon: f64 },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),

    #[error("horizon exhausted: {missed} of {total} trajectories never passed the loosest threshold")]
    HorizonExhausted { missed: usize, total: usize },

    #[error("non-stationary window (half-window z = {z:.2}); mean so far {value:.6e}")]
    NonStationary { value: f64, z: f64 },
}
