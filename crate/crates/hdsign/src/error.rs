//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in this crate.
///
/// The variants are grouped by how a caller should react: `Domain` and
/// `Config` mean the request itself was malformed, `Data` variants mean the
/// supplied observations were unusable, `Capacity` means the run was refused
/// before allocating, and the rest are runtime failures.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A simulation or model configuration failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An observation row is (numerically) the zero vector and has no sign.
    #[error("row {row} has norm {norm:e}; spherical directions require nonzero observations")]
    DegenerateRow { row: usize, norm: f64 },

    /// An observation row is not on the unit sphere.
    #[error("row {row} has norm {norm} but unit vectors are required (tolerance {tol:e}); pass data through row normalization first")]
    NotUnit { row: usize, norm: f64, tol: f64 },

    /// Two inputs that must share a dimension do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A cell was refused because its estimated working set exceeds the budget.
    #[error("capacity exceeded for cell n={n}, p={p}, M={m} (n*p*M = {product}): estimated {estimated_bytes} bytes against a budget of {budget_bytes}")]
    Capacity {
        n: usize,
        p: usize,
        m: usize,
        product: u128,
        estimated_bytes: u128,
        budget_bytes: u128,
    },

    /// A grid run stopped at a failing cell; `completed` lists the cells that
    /// finished before the abort, in execution order.
    #[error("grid aborted at cell n={n}, p={p} after {} completed cell(s): {source}", completed.len())]
    GridAborted {
        n: usize,
        p: usize,
        #[source]
        source: Box<Error>,
        completed: Vec<(usize, usize)>,
    },

    /// An iterative numeric routine did not converge.
    #[error("no convergence in {what} after {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },

    /// File I/O failure, annotated with the path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A report file could not be parsed.
    #[error("cannot parse report: {0}")]
    ReportParse(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io { path: path.display().to_string(), source }
    }
}
