use thiserror::Error;

pub type Result<T> = std::result::Result<T, HomogError>;

#[derive(Debug, Error)]
pub enum HomogError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("coefficient is not uniformly elliptic: sampled min eigenvalue {min_eigenvalue} <= 0")]
    NotElliptic { min_eigenvalue: f64 },

    #[error("epsilon {eps} not grid-compatible: {reason}")]
    IncompatibleEpsilon { eps: f64, reason: String },

    #[error("point {0:?} lies outside the closure of the domain")]
    OutsideDomain(Vec<f64>),

    #[error("nonpositive coefficient {value} at node {node}")]
    NonpositiveCoefficient { node: usize, value: f64 },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient points for a rate fit: {usable} usable, need at least 2")]
    InsufficientPoints { usable: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("translation slice {slice} failed: {source}")]
    Slice {
        slice: usize,
        #[source]
        source: Box<HomogError>,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<HomogError>,
    },
}

impl HomogError {
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        HomogError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_slice(self, slice: usize) -> Self {
        HomogError::Slice {
            slice,
            source: Box::new(self),
        }
    }
}
