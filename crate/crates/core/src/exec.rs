//! Data-parallel map over sample indices. With the `parallel` feature the
//! work runs on a rayon pool; without it every map is a plain loop.

/// How to run an indexed map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel { workers: usize },
}

impl Execution {
    /// One worker means sequential. Zero picks the available parallelism.
    pub fn from_workers(workers: usize) -> Self {
        let workers = if workers == 0 {
            available_workers()
        } else {
            workers
        };
        if workers <= 1 || !cfg!(feature = "parallel") {
            Execution::Sequential
        } else {
            Execution::Parallel { workers }
        }
    }

    pub fn workers(&self) -> usize {
        match self {
            Execution::Sequential => 1,
            Execution::Parallel { workers } => *workers,
        }
    }
}

pub fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Owns the thread pool for repeated maps.
pub struct Executor {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    pub fn new(execution: Execution) -> Self {
        #[cfg(feature = "parallel")]
        {
            let pool = match execution {
                Execution::Sequential => None,
                Execution::Parallel { workers } => Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .build()
                        .expect("thread pool"),
                ),
            };
            Executor { pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = execution;
            Executor {}
        }
    }

    /// `f(i)` for every `i` in `range`, results in index order.
    pub fn map<T, F>(&self, range: std::ops::Range<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| range.into_par_iter().map(&f).collect());
        }
        range.map(f).collect()
    }
}
