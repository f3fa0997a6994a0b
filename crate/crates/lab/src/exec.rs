//! Thread-pool trial executor.

use forrelation_core::exec::TrialExecutor;
use rayon::prelude::*;

pub const WORKERS_ENV: &str = "FORREL_WORKERS";

pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    pub fn new(workers: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
        Self { pool }
    }

    /// Worker count from `FORREL_WORKERS`, else rayon's default.
    pub fn from_env() -> Self {
        let workers = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()).unwrap_or(0);
        Self::new(workers)
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl TrialExecutor for Parallel {
    fn map<T, F>(&self, trials: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| (0..trials).into_par_iter().map(f).collect())
    }
}
