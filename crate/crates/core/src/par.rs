//! Data-parallel helpers.
//!
//! With the `parallel` feature these dispatch to rayon; without it they run
//! sequentially. Each work item is computed independently, so both paths give
//! bit-identical output for any thread count.

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "HETEROSYNC_THREADS";

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Calls `f(i, &mut items[i])` for every element.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items
            .par_iter_mut()
            .with_min_len(64)
            .enumerate()
            .for_each(|(i, x)| f(i, x));
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
}

/// Calls `f(chunk_index, chunk)` on consecutive chunks of `chunk` elements.
pub fn for_each_chunk_mut<T, F>(items: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items
            .par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Number of worker threads the helpers above will use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<R, F>(threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .expect("failed to build thread pool")
            .install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

/// Sizes the global pool from `HETEROSYNC_THREADS` if set. Returns the cap
/// that was applied, if any.
pub fn init_from_env() -> Option<usize> {
    let cap = std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok()?;
    #[cfg(feature = "parallel")]
    {
        // Fails only if the global pool already exists; the cap is then moot.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cap.max(1))
            .build_global();
    }
    Some(cap)
}
