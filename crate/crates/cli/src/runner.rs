//! Parallel simulation driver.

use rayon::prelude::*;

use sciss_core::sim::{replicate, summarize, RepOutcome, SimConfig, SimSummary};

use crate::error::CliError;

/// Environment variable overriding the worker count.
pub const THREADS_VAR: &str = "SCISS_THREADS";

/// Worker count from `SCISS_THREADS`, else the available parallelism.
pub fn thread_count() -> Result<usize, CliError> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| CliError::Config(format!("{THREADS_VAR} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs every replication on a dedicated pool. Replications draw from their
/// own seeded streams, so the result does not depend on the thread count.
pub fn run_parallel(cfg: &SimConfig, threads: usize) -> Result<SimSummary, CliError> {
    cfg.validate().map_err(CliError::from_core)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<sciss_core::Result<RepOutcome>> =
        pool.install(|| (0..cfg.reps).into_par_iter().map(|r| replicate(cfg, r)).collect());
    summarize(cfg, &outcomes).map_err(CliError::from_core)
}

pub fn run(cfg: &SimConfig) -> Result<SimSummary, CliError> {
    run_parallel(cfg, thread_count()?)
}
