//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (on by default) an [`Executor`] owns a rayon
//! thread pool sized to the requested worker count. Without the feature, or
//! with a single worker, every operation runs on the calling thread. Results
//! never depend on the worker count: work items are independent and results
//! are gathered in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of worker threads the host offers.
pub fn available_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

pub struct Executor {
    workers: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("workers", &self.workers).finish()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::sequential()
    }
}

impl Executor {
    /// An executor with `workers` threads. Zero means "all available".
    pub fn new(workers: usize) -> Self {
        let workers = if workers == 0 { available_workers() } else { workers };
        #[cfg(feature = "parallel")]
        {
            let pool = if workers > 1 {
                rayon::ThreadPoolBuilder::new().num_threads(workers).build().ok()
            } else {
                None
            };
            Self { workers, pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            Self { workers }
        }
    }

    pub fn sequential() -> Self {
        Self::new(1)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
        (0..n).map(f).collect()
    }

    /// Calls `f(chunk_index, chunk)` for each `chunk_len`-sized piece of `data`.
    pub fn for_each_chunk_mut<T, F>(&self, data: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let chunk_len = chunk_len.max(1);
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            pool.install(|| {
                data.par_chunks_mut(chunk_len)
                    .enumerate()
                    .for_each(|(k, chunk)| f(k, chunk))
            });
            return;
        }
        data.chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(k, chunk)| f(k, chunk));
    }
}
