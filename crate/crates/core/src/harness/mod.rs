//! Experiment harness: seeded sweeps, training with dropout, the
//! generalization-gap experiment, log-log slope fitting and the config
//! file format.

pub mod config;
pub mod gap;
pub mod slope;
pub mod sweep;
pub mod train;

pub use config::{ExperimentConfig, SweepSection};
pub use gap::{gap_experiment, GapReport, GapTrial, SyntheticTask};
pub use slope::{fit_loglog_slope, LogLogFit};
pub use sweep::{run_sweep, write_csv, SweepConfig, SweepRow, CSV_HEADER};
pub use train::{train_plain, train_with_dropout, Dataset, TrainConfig, TrainOutcome};

/// Runs `f` on a dedicated pool of `jobs` workers (all cores when 0).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> crate::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| crate::Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}
