//! Multi-threaded drivers. Results are identical to the sequential ones for
//! any thread count.

use qkdlink_core::experiments::{sweep_row, SweepRow};
use qkdlink_core::montecarlo::{assemble, simulate_batch, RunConfig, RunTruth, TagStream};
use qkdlink_core::system::{LinkConfig, SystemModel};
use qkdlink_core::Error;
use rayon::prelude::*;

/// Simulates every batch on the current rayon pool and merges them in batch
/// order.
pub fn simulate_quantum_run(cfg: &RunConfig) -> Result<(TagStream, RunTruth), Error> {
    cfg.validate()?;
    let offset = cfg.resolved_frame_offset();
    let batches: Vec<_> = (0..cfg.n_batches())
        .into_par_iter()
        .map(|b| simulate_batch(cfg, b, offset))
        .collect();
    Ok(assemble(cfg, offset, batches))
}

/// As [`simulate_quantum_run`] on a dedicated pool of `threads` workers.
pub fn simulate_with_threads(cfg: &RunConfig, threads: usize) -> Result<(TagStream, RunTruth), Error> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| simulate_quantum_run(cfg))
}

/// Sweep rows in grid order.
pub fn coexistence_sweep(
    model: &SystemModel,
    rop_grid_dbm: &[f64],
    config: LinkConfig,
) -> Result<Vec<SweepRow>, Error> {
    rop_grid_dbm
        .par_iter()
        .map(|&rop| sweep_row(model, rop, config))
        .collect()
}
