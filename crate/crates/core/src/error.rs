use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate family at point {center}: {neighbors} neighbors, at least 6 required")]
    DegenerateFamily { center: usize, neighbors: usize },

    #[error("ill-conditioned family (condition number {condition:.3e})")]
    IllConditionedFamily { condition: f64 },

    #[error("incomplete data: {0}")]
    IncompleteData(String),

    #[error("degenerate panel {index}: zero-length segment")]
    DegeneratePanel { index: usize },

    #[error("flat level set at boundary point {index}: |grad phi| = {norm:.3e}")]
    FlatLevelSet { index: usize, norm: f64 },

    #[error("missing snapshot: {0}")]
    MissingSnapshot(String),

    #[error("empty feature system: {0}")]
    EmptySystem(String),

    #[error("feature column `{name}` is identically zero")]
    ZeroColumn { name: String },

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("no model: {0}")]
    NoModel(String),

    #[error("time step {dt} violates the explicit stability bound {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("front topology failure at t = {time}: {reason}")]
    Topology { time: f64, reason: String },

    #[error("ill-posed model: {0}")]
    IllPosedModel(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format { path: path.into(), message: message.to_string() }
    }

    /// True for failures of the numerics rather than of the inputs or the filesystem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateFamily { .. }
                | Error::IllConditionedFamily { .. }
                | Error::FlatLevelSet { .. }
                | Error::SingularSystem(_)
                | Error::Topology { .. }
                | Error::IllPosedModel(_)
                | Error::EmptySystem(_)
                | Error::ZeroColumn { .. }
        )
    }
}
