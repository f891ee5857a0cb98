// SPDX-License-Identifier: Apache-2.0

//! Thread-parallel row execution.

use nvnmr_core::experiments::{row_error, RowRunner};
use nvnmr_core::Result;
use rayon::prelude::*;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "NVNMR_WORKERS";

/// Runs rows on a dedicated rayon pool. Results are returned in row order,
/// and the lowest failing row is reported, so output matches [`nvnmr_core::experiments::Serial`].
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    pub fn new(workers: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .expect("thread pool construction");
        Self { pool }
    }

    /// Worker count from `NVNMR_WORKERS`, else the available parallelism.
    pub fn from_env() -> Self {
        Self::new(worker_count(std::env::var(WORKERS_ENV).ok().as_deref()))
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

/// Parses a worker-count override, falling back to the available parallelism.
pub fn worker_count(value: Option<&str>) -> usize {
    value
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

impl RowRunner for Parallel {
    fn run<T, F>(&self, n: usize, job: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        let results: Vec<Result<T>> =
            self.pool.install(|| (0..n).into_par_iter().map(|k| job(k).map_err(|e| row_error(k, e))).collect());
        results.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nvnmr_core::experiments::{sweep, Serial};
    use nvnmr_core::Error;

    #[test]
    fn matches_serial_order() {
        let job = |k: usize| Ok((k * k) as u64);
        assert_eq!(sweep(&Parallel::new(4), 100, job).unwrap(), sweep(&Serial, 100, job).unwrap());
        assert!(sweep(&Parallel::new(2), 0, job).unwrap().is_empty());
    }

    #[test]
    fn reports_lowest_failing_row() {
        let r: Result<Vec<u8>> =
            sweep(&Parallel::new(4), 50, |k| if k % 7 == 5 { Err(Error::NonFiniteData) } else { Ok(0) });
        assert!(matches!(r, Err(Error::RowFailed { row: 5, .. })));
    }

    #[test]
    fn worker_override() {
        assert_eq!(worker_count(Some("3")), 3);
        assert!(worker_count(Some("zero")) >= 1);
        assert!(worker_count(Some("0")) >= 1);
        assert_eq!(Parallel::new(2).workers(), 2);
    }
}
