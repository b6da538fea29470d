use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two matrices that must agree in some dimension do not.
    #[error("dimension mismatch between {left} and {right}: {detail}")]
    DimensionMismatch {
        left: String,
        right: String,
        detail: String,
    },

    #[error("{0} contains a non-finite entry")]
    NonFinite(String),

    #[error("{name} has shape {found:?}, expected {expected:?}")]
    Shape {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("{0} must be square")]
    NotSquare(String),

    #[error("data are inconsistent: no system reproduces the samples (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    InconsistentData { residual: f64, tolerance: f64 },

    #[error("Sylvester operator is singular: spectra intersect (smallest singular value {0:.3e})")]
    SingularSylvester(f64),

    /// The exosystem matrix has an eigenvalue strictly inside the unit disk.
    #[error("A1 is not anti-stable: eigenvalue of modulus {0:.6} inside the unit disk")]
    NotAntiStable(f64),

    #[error("A3 is required for this operation but was not supplied")]
    MissingA3,

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("parse error in {source_name}: {message}")]
    Parse {
        source_name: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn mismatch(left: &str, right: &str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            left: left.to_string(),
            right: right.to_string(),
            detail: detail.into(),
        }
    }

    pub(crate) fn shape(name: &str, expected: (usize, usize), found: (usize, usize)) -> Self {
        Error::Shape {
            name: name.to_string(),
            expected,
            found,
        }
    }
}
