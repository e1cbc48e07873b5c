//! Order-preserving fan-out over independent work items.
//!
//! With the `parallel` feature the work runs on a rayon pool of the requested
//! width; without it (or with a width of one) items run in order on the
//! calling thread. Results always come back in input order.

/// How independent work items are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Parallel with the given number of worker threads (0 = rayon default).
    Parallel(usize),
}

impl Execution {
    /// `jobs` of 1 means sequential, 0 means all available cores.
    pub fn from_jobs(jobs: usize) -> Self {
        if jobs == 1 || !cfg!(feature = "parallel") {
            Self::Sequential
        } else {
            Self::Parallel(jobs)
        }
    }
}

impl Default for Execution {
    fn default() -> Self {
        Self::from_jobs(0)
    }
}

/// Applies `f` to every item and returns the results in input order.
pub fn map_ordered<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => items.iter().map(f).collect(),
        Execution::Parallel(width) => par_map(items, width, f),
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: &[T], width: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if width == 0 {
        return items.par_iter().map(&f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(width).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("could not build a {width}-thread pool ({e}); running sequentially");
            items.iter().map(f).collect()
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R, F>(items: &[T], _width: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}
