//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by grids, solvers, regression and the pipeline layers.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("stencil {tag} needs at least {needed} points, got {got}")]
    StencilTooShort {
        tag: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("upwind stencil uw2 requires an advecting velocity field")]
    MissingAdvect,

    #[error("time derivative needs n_t >= 3, got {0}")]
    TooFewTimeSteps(usize),

    #[error("cannot trim {n_cells} cells from each end of {n_x} columns")]
    BufferTooWide { n_cells: usize, n_x: usize },

    #[error("filter width must be odd and <= n_x, got k = {k} with n_x = {n_x}")]
    BadFilterWidth { k: usize, n_x: usize },

    #[error("closure `{kind}` needs derivative field `{field}`")]
    MissingDerivative { kind: String, field: &'static str },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("r2 undefined: truth is constant (SS_tot = 0)")]
    ConstantTruth,

    #[error("solution diverged at sub-step {step} (t = {time:.6}): non-finite values")]
    Divergence { step: usize, time: f64 },

    #[error("realization {index}: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid case spec: {0}")]
    CaseSpec(String),

    #[error("invalid library spec: {0}")]
    LibrarySpec(String),

    #[error("term `{term}` references parameter `{symbol}` missing from the snapshot")]
    MissingParam { term: String, symbol: String },

    #[error("gram column mismatch: {0}")]
    ColumnMismatch(String),

    #[error("gram matrix is singular (pivot {pivot:.3e} at column {col})")]
    Singular { col: usize, pivot: f64 },

    #[error("{method} did not converge after {iterations} iterations (last delta {delta:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        delta: f64,
    },

    #[error("invalid ensemble config: {0}")]
    EnsembleConfig(String),

    #[error("all terms pruned; last non-empty iteration was {last_iteration} with {survivors:?}")]
    AllTermsPruned {
        last_iteration: usize,
        survivors: Vec<String>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("dataset archive error: {0}")]
    Archive(String),

    #[error("truncated file `{path}` at byte offset {offset}")]
    Truncated { path: String, offset: u64 },

    #[error("archive format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 numerical, 4 convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::CaseSpec(_)
            | Error::LibrarySpec(_)
            | Error::EnsembleConfig(_)
            | Error::Archive(_)
            | Error::VersionMismatch { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Truncated { .. } => 2,
            Error::NoConvergence { .. } | Error::AllTermsPruned { .. } => 4,
            Error::Realization { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
