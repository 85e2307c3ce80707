use rayon::prelude::*;

use super::trajectory::{run_trajectory, SimConfig, TrajectoryResult};
use crate::error::Result;

/// Runs `n` trajectories with seeds `seed_base + i`; results are returned in
/// trajectory order whatever the completion order.
pub fn run_ensemble(config: &SimConfig, n: usize, seed_base: u64) -> Vec<Result<TrajectoryResult>> {
    run_ensemble_with(config, n, seed_base, Ok)
}

/// Like [`run_ensemble`] but reduces each trajectory with `f` as soon as it
/// finishes, so long runs need not be held in memory together.
pub fn run_ensemble_with<T, F>(config: &SimConfig, n: usize, seed_base: u64, f: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(TrajectoryResult) -> Result<T> + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cfg = *config;
            cfg.seed = seed_base.wrapping_add(i as u64);
            run_trajectory(&cfg).and_then(&f)
        })
        .collect()
}
