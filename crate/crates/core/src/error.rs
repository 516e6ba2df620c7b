use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
///
/// Variant names double as the error names reported by the command-line
/// front end, so keep them stable.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("cannot parse row {row}, column `{column}`: {reason}")]
    ParseError { row: usize, column: String, reason: String },
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("vehicle {0} has zero mean longitudinal velocity")]
    AmbiguousHeading(i64),
    #[error("source rate {source_hz} Hz is not a multiple of target rate {target_hz} Hz")]
    RateMismatch { source_hz: u32, target_hz: u32 },
    #[error("trajectory has no lane change")]
    NoLaneChange,
    #[error("trajectory has {0} lane changes; split it first")]
    MultipleLaneChanges(usize),
    #[error("invalid scenario: {0}")]
    SpecError(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("scene invariant violated: {0}")]
    InvalidScene(String),
    #[error("Gram matrix is singular: {0}")]
    SingularGram(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeError { expected: String, got: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("only {found} directions with nonzero variance, {wanted} requested")]
    RankDeficient { wanted: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("observation {index} has zero density under every state")]
    NumericalUnderflow { index: usize },
    #[error("path not found: {}", .0.display())]
    PathNotFound(PathBuf),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable variant name, e.g. `"SingularGram"`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "MissingColumn",
            Error::ParseError { .. } => "ParseError",
            Error::EmptyInput => "EmptyInput",
            Error::AmbiguousHeading(_) => "AmbiguousHeading",
            Error::RateMismatch { .. } => "RateMismatch",
            Error::NoLaneChange => "NoLaneChange",
            Error::MultipleLaneChanges(_) => "MultipleLaneChanges",
            Error::SpecError(_) => "SpecError",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidScene(_) => "InvalidScene",
            Error::SingularGram(_) => "SingularGram",
            Error::ShapeError { .. } => "ShapeError",
            Error::EmptyDataset => "EmptyDataset",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::NumericalUnderflow { .. } => "NumericalUnderflow",
            Error::PathNotFound(_) => "PathNotFound",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::LengthMismatch { left, right })
    }
}
