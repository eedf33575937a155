//! Data-parallel map over sample slices, falling back to a plain loop when
//! the `parallel` feature is disabled. Output order always matches input
//! order, so reductions done afterwards are bit-identical regardless of
//! worker count.

/// Apply `f` to every item, preserving order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Apply `f` to every item, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Run `job` on a pool with `workers` threads (0 = library default).
/// Without the `parallel` feature the job simply runs on the caller thread.
#[cfg(feature = "parallel")]
pub fn with_workers<R: Send>(workers: usize, job: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return job();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("failed to build worker pool");
    pool.install(job)
}

/// Run `job` on a pool with `workers` threads (0 = library default).
/// Without the `parallel` feature the job simply runs on the caller thread.
#[cfg(not(feature = "parallel"))]
pub fn with_workers<R>(workers: usize, job: impl FnOnce() -> R) -> R {
    let _ = workers;
    job()
}
