//! Data-parallel helpers. With the `parallel` feature the index sweeps run
//! on the rayon pool; without it, or when [`Execution::Sequential`] is
//! requested, they run on the calling thread.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
mod rayon_impl;
mod sequential;

/// How index sweeps are executed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run sweeps in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Execution mode for a requested degree of parallelism: one thread is
/// sequential, anything else sizes the global pool (zero keeps the
/// default of one thread per core). Only the first call can size the pool.
pub fn configure(threads: usize) -> Result<Execution, String> {
    if threads == 1 {
        return Ok(Execution::Sequential);
    }
    if !Execution::parallel_available() {
        return Err("built without the `parallel` feature".into());
    }
    #[cfg(feature = "parallel")]
    if threads > 1 {
        rayon_impl::set_threads(threads)?;
    }
    Ok(Execution::Parallel)
}

/// Evaluates `f(i)` for `i in 0..n` and collects the results in order.
pub fn map_indices<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => rayon_impl::map_indices(n, f),
        _ => sequential::map_indices(n, f),
    }
}

/// Fallible variant of [`map_indices`]; returns the first error by index.
pub fn try_map_indices<T, E, F>(exec: Execution, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indices(exec, n, f).into_iter().collect()
}

/// Fills `out[i] = f(i)` in place.
pub fn fill<T, F>(exec: Execution, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => rayon_impl::fill(out, f),
        _ => sequential::fill(out, f),
    }
}
