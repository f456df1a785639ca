use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch along mode {mode}: expected length {expected}, got {got}")]
    ModeMismatch {
        op: &'static str,
        mode: usize,
        expected: usize,
        got: usize,
    },

    #[error("{op}: dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("{what} = {value} is out of range (allowed {min}..={max})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("SVD did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("degenerate iterate at iteration {iteration}: norm {norm:e} before normalization")]
    DegenerateIterate { iteration: usize, norm: f64 },

    #[error("component {component} has zero eigenvalue, loadings undefined")]
    ZeroEigenvalue { component: usize },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("{count} missing cells (gene, region, time), first {}: {}", .cells.len(), format_cells(.cells))]
    MissingCells {
        count: usize,
        cells: Vec<(String, String, String)>,
    },

    #[error("bad tensor file: {0}")]
    Format(String),

    #[error("invalid config: {message}: {}", .keys.join(", "))]
    Config { message: String, keys: Vec<String> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_cells(cells: &[(String, String, String)]) -> String {
    cells
        .iter()
        .map(|(g, s, t)| format!("({g}, {s}, {t})"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
