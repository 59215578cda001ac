use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SomError {
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NonSymmetric(f64),
    #[error("matrix has a significantly negative eigenvalue {0:e}")]
    IndefiniteMatrix(f64),
    #[error("linear system is singular (relative residual {0:e})")]
    SingularSystem(f64),
    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("cannot fit {classes} unique codes into {bits} bits")]
    CapacityExceeded { classes: usize, bits: usize },
    #[error("code length {0} is not a power of two")]
    SizeNotPowerOfTwo(usize),
    #[error("class means are all identical")]
    DegenerateMeans,
    #[error("{bits} bits cannot hold one-hot codes for {classes} classes")]
    TooFewBits { classes: usize, bits: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("no {0} pairs present")]
    NoPairs(&'static str),
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("probe has no frames")]
    EmptyProbe,
    #[error("gallery has no codes")]
    EmptyGallery,
    #[error("code lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: String, found: String },
    #[error("io error: {0}")]
    Io(String),
}

impl SomError {
    /// Whether the error stems from invalid user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SomError::InvalidSpec(_)
                | SomError::InvalidConfig(_)
                | SomError::Parse { .. }
                | SomError::VersionMismatch { .. }
                | SomError::DimensionMismatch(_)
                | SomError::ShapeMismatch(_)
                | SomError::CapacityExceeded { .. }
                | SomError::SizeNotPowerOfTwo(_)
                | SomError::TooFewBits { .. }
                | SomError::LabelOutOfRange { .. }
                | SomError::RankOutOfRange { .. }
                | SomError::LengthMismatch(..)
        )
    }
}

impl From<std::io::Error> for SomError {
    fn from(e: std::io::Error) -> Self {
        SomError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SomError>;
