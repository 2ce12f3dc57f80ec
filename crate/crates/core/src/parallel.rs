//! Worker-pool plumbing.
//!
//! Every parallel loop in this crate maps independent outputs (rows,
//! pixels, samples) and reduces sequentially, so the worker count can
//! only change how fast bytes are produced, never which bytes. This
//! helper exists to bound resource usage from the CLI.

use crate::error::{Error, Result};

/// Runs `f` inside a thread pool of `workers` threads; `workers == 0`
/// uses the process-wide default pool.
pub fn run_in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("workers: {e}")))?;
    Ok(pool.install(f))
}
