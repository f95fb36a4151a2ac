use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite (pivot {pivot:e} at original index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("triangle {triangle} is degenerate (area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("location {index} ({x}, {y}) lies outside the mesh")]
    LocationOutsideMesh { index: usize, x: f64, y: f64 },

    #[error("kappa must be positive, got {0}")]
    NonPositiveKappa(f64),

    #[error(
        "alpha = {0} is odd; the Laplace moving average operator is only available for even alpha"
    )]
    OddAlphaUnsupported(u32),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("zero diagonal entry at index {0}")]
    ZeroDiagonal(usize),

    #[error("no convergence after {0} iterations")]
    ConvergenceFailure(usize),

    #[error("target log-density is not finite at the current state ({0})")]
    NonFiniteTarget(String),

    #[error("trace of length {0} is too short (need at least 100)")]
    TraceTooShort(usize),

    #[error("non-finite predictive density in fold {fold}, draw {draw}")]
    NonFiniteDensity { fold: usize, draw: usize },

    #[error("only {groups} groups for {folds} folds")]
    TooFewGroups { groups: usize, folds: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: column `{column}` is not numeric (`{value}`)")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {0}: negative or non-integer count")]
    NegativeCount(usize),

    #[error("row {0}: response must be 0 or 1")]
    NonBinary(usize),

    #[error("row {0}: offset must be positive")]
    NonPositiveOffset(usize),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("configuration has {} problem(s):\n{}", .0.len(), join_lines(.0))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join_lines(v: &[String]) -> String {
    v.iter().map(|s| format!("  - {s}")).collect::<Vec<_>>().join("\n")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error comes from validating user input rather than from a
    /// failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse { .. }
                | Error::MissingColumn(_)
                | Error::NonNumeric { .. }
                | Error::NegativeCount(_)
                | Error::NonBinary(_)
                | Error::NonPositiveOffset(_)
                | Error::LocationOutsideMesh { .. }
                | Error::DegenerateTriangle { .. }
                | Error::InvalidMesh(_)
                | Error::InvalidGraph(_)
                | Error::OddAlphaUnsupported(_)
                | Error::InvalidModel(_)
                | Error::TooFewGroups { .. }
        )
    }
}
