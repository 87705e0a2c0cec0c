use std::path::PathBuf;

use thiserror::Error;

use crate::world::ScenarioKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing scenario parameter `{0}`")]
    MissingParam(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite state after stepping from t={t}")]
    NumericOverflow { t: f64 },

    #[error("{kind}: no in-bounds trajectory after {attempts} attempts")]
    Sampling { kind: ScenarioKind, attempts: usize },

    #[error("frame {frame}: object outside the rendered window")]
    Render { frame: usize },

    #[error("no object found (peak correlation {peak:.3})")]
    NoObject { peak: f64 },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("singular normal matrix; use ridge regression instead")]
    Singular,

    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("video {video}: {source}")]
    Video { video: String, source: Box<Error> },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
