use thiserror::Error;

/// Errors shared by the measure engine, basis builder and operator lab.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error(
        "combined monomial degree {required} exceeds the quadrature spec's max_degree {max_degree}"
    )]
    DegreeExceedsSpec { required: u32, max_degree: u32 },

    #[error("Gram matrix at degree {degree} is numerically rank deficient (min eigenvalue {min_eigenvalue:.3e})")]
    RankDeficientGram { degree: u32, min_eigenvalue: f64 },

    #[error("Gram-Schmidt breakdown at degree {degree}: candidate relative norm {rel_norm:.3e} is in the unresolvable band")]
    GramSchmidtBreakdown { degree: u32, rel_norm: f64 },

    #[error("polynomial is not sigma-odd: monomial with even z3 exponent present")]
    ParityViolation,

    #[error("polynomial lives on the wrong domain: expected {expected}, got {got}")]
    AmbientMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("operator window too small: needs degrees up to {required}, covers up to {available}")]
    WindowTooSmall { required: u32, available: u32 },

    #[error("window/basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("dictionary Gram matrix is numerically singular (min/max singular value {ratio:.3e})")]
    SingularDictionary { ratio: f64 },

    #[error("moment cache file error at line {line}: {msg}")]
    CacheFormat { line: usize, msg: String },

    #[error("basis file error: {0}")]
    BasisFormat(String),

    #[error("window file error: {0}")]
    WindowFormat(String),

    #[error("cache max_degree {found} does not match requested {expected}")]
    MaxDegreeMismatch { expected: u32, found: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
