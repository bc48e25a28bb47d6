use std::path::PathBuf;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("fields live on different windows (half widths {left} and {right})")]
    MismatchedWindows { left: usize, right: usize },

    #[error("non-finite value at site {site}")]
    NonFinite { site: i64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("window too small: {0}")]
    Window(String),

    #[error("singular: {0}")]
    Singular(String),

    #[error("degenerate solitary wave: {0}")]
    Degenerate(String),

    #[error("lambda = {re}{im:+}i lies on a cut; a side must be given")]
    AmbiguousBranch { re: f64, im: f64 },

    #[error("resolvent pole: |D(lambda)| = {abs_d:e}")]
    Pole { abs_d: f64 },

    #[error(
        "modulation fit did not converge after {iterations} iterations (residual {residual:e})"
    )]
    FitNonConvergence { iterations: usize, residual: f64 },

    #[error("modulation denominator too small: {0:e}")]
    SmallDenominator(f64),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
