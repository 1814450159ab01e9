use thiserror::Error;

/// Errors raised by the kernel, particle, scheme and study routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SphError {
    #[error("smoothing length must be positive and finite, got {0}")]
    InvalidSmoothingLength(f64),

    #[error("non-finite argument: {0}")]
    NonFinite(&'static str),

    #[error("negative distance {0}")]
    NegativeDistance(f64),

    #[error("unsupported moment order {0} (expected 0..=4)")]
    UnsupportedMomentOrder(u32),

    #[error("particle count {0} is not a perfect square >= 4")]
    NotPerfectSquare(usize),

    #[error("jitter amplitude fraction {0} outside [0, 0.5)")]
    InvalidJitter(f64),

    #[error("neighbor radius must be positive and finite, got {0}")]
    InvalidRadius(f64),

    #[error("no particle is farther than {radius} from every domain edge")]
    EmptyInterior { radius: f64 },

    #[error("particle has no effective kernel support (all weights zero)")]
    EmptySupport,

    #[error("field has {got} samples but the particle set has {expected}")]
    FieldLength { expected: usize, got: usize },

    #[error("neighbor list covers {got} particles but the particle set has {expected}")]
    NeighborMismatch { expected: usize, got: usize },

    #[error("point ({x}, {y}) lies outside the unit square")]
    OutOfDomain { x: f64, y: f64 },

    #[error("{0}")]
    InvalidConfig(String),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("log-log fit requires strictly positive data, got ({x}, {y})")]
    NonPositive { x: f64, y: f64 },

    #[error("ladder row N={n}: {source}")]
    Row { n: usize, source: Box<SphError> },

    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SphError {
    fn from(err: std::io::Error) -> Self {
        SphError::Io(err.to_string())
    }
}

pub type Result<T, E = SphError> = std::result::Result<T, E>;
