//! Worker pool for the stage-parallel phases.
//!
//! Work is split by stage block: each task owns one block of every batch it
//! writes, so results do not depend on the number of workers.

use rayon::prelude::*;

#[derive(Debug)]
pub struct WorkerPool {
    workers: usize,
    pool: Option<rayon::ThreadPool>,
}

impl WorkerPool {
    /// A pool with `workers` threads. One worker (or zero) runs everything on
    /// the calling thread.
    pub fn new(workers: usize) -> Self {
        let workers = workers.max(1);
        let pool = (workers > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .thread_name(|i| format!("ocpqp-worker-{i}"))
                .build()
                .expect("failed to start worker threads")
        });
        Self { workers, pool }
    }

    pub fn serial() -> Self {
        Self::new(1)
    }

    /// Worker count from `OCPQP_WORKERS`, else the available parallelism.
    pub fn from_env() -> Self {
        let n = std::env::var("OCPQP_WORKERS")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(available_workers);
        Self::new(n)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `f` on every task and collects the results in task order.
    pub fn map<T, R, F>(&self, tasks: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        match &self.pool {
            None => tasks.into_iter().map(f).collect(),
            Some(p) => p.install(|| tasks.into_par_iter().map(f).collect()),
        }
    }
}

impl Default for WorkerPool {
    fn default() -> Self {
        Self::serial()
    }
}

pub fn available_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
