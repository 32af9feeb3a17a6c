use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} outside domain [{start}, {end}]")]
    Domain { t: f64, start: f64, end: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("synthesis singular at t = {t}: {reason}")]
    Synthesis { t: f64, reason: String },

    #[error("truncation deficit {deficit:.3e} exceeds tolerance; try cutoff >= {suggested_cutoff}")]
    Truncation { deficit: f64, suggested_cutoff: usize },

    #[error("basis dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("occupation {0:?} not in basis")]
    OccupationNotInBasis(Vec<usize>),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("passage {k} not activated: residual {residual:.3e} at t = {t}")]
    PassageNotActivated { k: usize, residual: f64, t: f64 },

    #[error("excitation mismatch: {input} in, {output} out")]
    ExcitationMismatch { input: usize, output: usize },

    #[error("permanent guard: {0} excitations exceed the limit of 8")]
    PermanentGuard(usize),

    #[error("config: {0}")]
    Config(String),

    #[error("acceptance failed: {0}")]
    Acceptance(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
