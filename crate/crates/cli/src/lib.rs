//! Command-line harness for `curvatura`: the manifold zoo, run
//! configuration, command dispatch and report emission.

pub mod config;
pub mod report;
pub mod run;
pub mod zoo;

use curvatura::GeometryError;

pub use config::{Command, Format, RunConfig, Tolerances};
pub use report::Report;
pub use run::run;

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "CURVATURA_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot write report: {0}")]
    Output(String),
}

impl CliError {
    /// 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Runs `f` on a pool sized by [`WORKERS_ENV`] (rayon's default otherwise).
pub fn with_workers<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let workers = match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(pool.install(f))
}
