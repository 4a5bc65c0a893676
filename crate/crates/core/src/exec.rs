//! Execution mode for the data-parallel loops.
//!
//! With the `parallel` feature (default) the enumeration and sweep loops run
//! on rayon's pool; without it, or with [`Execution::Sequential`], they run on
//! the calling thread. Results are always collected in input order, so output
//! does not depend on the mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    /// Parallel when the `parallel` feature is enabled, sequential otherwise.
    #[default]
    Auto,
    Sequential,
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Execution::Sequential)
    }

    /// Order-preserving map over a slice.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<R, F>(self, n: u64, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Order-preserving flat map over a slice.
    pub fn flat_map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> Vec<R> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().flat_map_iter(f).collect();
        }
        items.iter().flat_map(f).collect()
    }
}

/// Runs `f` for every seed in `seeds`, in parallel when enabled, returning
/// results in seed order. Used by the property sweeps and benches.
pub fn sweep<R, F>(exec: Execution, seeds: std::ops::Range<u64>, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64) -> R + Sync + Send,
{
    let start = seeds.start;
    exec.map_range(seeds.end.saturating_sub(start), |i| f(start + i))
}
