//! File formats, experiment configuration and the benchmark harness built on
//! [`zakai_core`].
//!
//! The `zakai` binary exposes these as subcommands; see the README for usage.

pub mod config;
pub mod harness;
pub mod io;

use std::path::PathBuf;

pub use zakai_core as core;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] zakai_core::Error),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed path file, line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
    #[error("ground truth cross-check failed: PF {pf} vs oracle {oracle}, tolerance {tolerance}")]
    CrossCheck { pf: f64, oracle: f64, tolerance: f64 },
}

impl Error {
    /// Whether the failure is a weight degeneracy in some filter.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::Core(zakai_core::Error::Degenerate { .. }))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Runs `f` on a pool with `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        builder = builder.num_threads(w);
    }
    Ok(builder.build()?.install(f))
}
