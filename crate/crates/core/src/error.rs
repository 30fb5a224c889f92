use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("radius undefined: need at least 2 vertices, got {0}")]
    RadiusUndefined(usize),

    #[error("over-compression at taxel {taxel}: displacement {displacement_mm:.4} mm exceeds pitch {pitch_mm:.4} mm")]
    OverCompression {
        taxel: usize,
        displacement_mm: f64,
        pitch_mm: f64,
    },

    #[error("non-finite value in input")]
    NonFinite,

    #[error("power iteration did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("problem too large for exhaustive search: {size} columns (limit {limit})")]
    TooLarge { size: usize, limit: usize },

    #[error("single-class data: binary training needs both labels")]
    SingleClass,

    #[error("class {0} has no observations")]
    EmptyClass(String),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("malformed frame record: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
