//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the rayon pool;
//! without it, or when [`Execution::Sequential`] is requested, the same closures
//! run in a plain loop. Callers always receive results in input order, and
//! Monte Carlo reductions are split into fixed chunks with their own seeds, so
//! the output is identical in both modes.

use std::ops::Range;

use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this mode actually runs on the rayon pool in the current build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Apply `f` to every item, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Apply `f` to `0..n`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Monte Carlo helper: split `total` draws into fixed-size chunks, run
    /// `body(rng, chunk_len)` on each with an independent stream of `seed`, and
    /// return the per-chunk results in chunk order.
    pub fn chunked<R, F>(self, total: usize, seed: u64, body: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&mut Rng, usize) -> R + Sync + Send,
    {
        self.chunked_ranges(total, seed, |rng, range| body(rng, range.len()))
    }

    /// As [`Execution::chunked`], but `body` receives the index range of its chunk.
    pub fn chunked_ranges<R, F>(self, total: usize, seed: u64, body: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&mut Rng, Range<usize>) -> R + Sync + Send,
    {
        let chunks = total.div_ceil(MC_CHUNK);
        self.map_range(chunks, |c| {
            let start = c * MC_CHUNK;
            let end = total.min(start + MC_CHUNK);
            let mut rng = rng::stream(seed, c as u64);
            body(&mut rng, start..end)
        })
    }
}

/// Run `f` with at most `workers` threads (0 means all cores). Without the
/// `parallel` feature this simply calls `f`.
pub fn with_workers<R, F>(workers: usize, f: F) -> crate::Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| crate::Error::config(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        Ok(f())
    }
}

/// Draws per Monte Carlo chunk. Part of the reproducibility contract: changing it
/// changes every Monte Carlo estimate.
pub const MC_CHUNK: usize = 1 << 16;
