//! Data-parallel batch execution.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it, or with [`ExecMode::Sequential`], items run in order on the
//! calling thread. Results are always returned in index order, so output is
//! independent of scheduling.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    /// `None` uses the global pool.
    Parallel { workers: Option<usize> },
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel { workers: None }
        } else {
            ExecMode::Sequential
        }
    }
}

impl ExecMode {
    pub fn with_workers(workers: Option<usize>) -> Self {
        match workers {
            Some(1) => ExecMode::Sequential,
            w => match ExecMode::default() {
                ExecMode::Parallel { .. } => ExecMode::Parallel { workers: w },
                seq => seq,
            },
        }
    }
}

/// `f(0), f(1), ..., f(n - 1)` in index order.
pub fn map_indexed<T, F>(n: usize, mode: ExecMode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        ExecMode::Parallel { workers } => parallel::map_indexed(n, workers, f),
    }
}

/// `f` over `items`, results in input order.
pub fn map_slice<I, T, F>(items: &[I], mode: ExecMode, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_indexed(items.len(), mode, |i| f(&items[i]))
}

#[cfg(feature = "parallel")]
mod parallel {
    use rayon::prelude::*;

    pub fn map_indexed<T, F>(n: usize, workers: Option<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let run = || (0..n).into_par_iter().map(&f).collect();
        match workers {
            None => run(),
            Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
                Ok(pool) => pool.install(run),
                Err(_) => run(),
            },
        }
    }
}

#[cfg(not(feature = "parallel"))]
mod parallel {
    pub fn map_indexed<T, F>(n: usize, _workers: Option<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
