use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Which yarn family an axis estimate was trying to find.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Warp,
    Weft,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Warp => f.write_str("warp"),
            Axis::Weft => f.write_str("weft"),
        }
    }
}

/// Decode pipeline stage, attached to errors raised while decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Preprocess,
    Colors,
    Axes,
    Likelihood,
    Trivalue,
    Merge,
    Representatives,
    Reestimate,
    Assign,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Preprocess => "preprocess",
            Stage::Colors => "colors",
            Stage::Axes => "axes",
            Stage::Likelihood => "likelihood",
            Stage::Trivalue => "trivalue",
            Stage::Merge => "merge",
            Stage::Representatives => "representatives",
            Stage::Reestimate => "reestimate",
            Stage::Assign => "assign",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("distance transform needs at least one object pixel")]
    EmptyObject,
    #[error("crossings collide at pixel ({x}, {y}) after rounding")]
    Collision { x: usize, y: usize },
    #[error("pattern does not fit the canvas: {0}")]
    Layout(String),
    #[error("could not estimate {axis} positions: {reason}")]
    AxisEstimation { axis: Axis, reason: String },
    #[error("representative colors are degenerate (image has a single intensity cluster)")]
    DegenerateColors,
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at(self, stage: Stage) -> Self {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Innermost error with stage labels removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
