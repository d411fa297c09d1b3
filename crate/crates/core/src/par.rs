//! Data-parallel helpers with a sequential fallback.
//!
//! Every data-parallel loop in the crate goes through [`Exec`]. With the
//! `parallel` feature disabled, `Exec::Parallel` silently runs sequentially,
//! so callers never need their own `cfg` gates.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for data-parallel loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True when work will actually be spread over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Applies `f` to every item, preserving input order in the output.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Fills `out[k] = f(k)` for every index.
pub fn fill<F>(exec: Exec, out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        const CHUNK: usize = 256;
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * CHUNK;
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = f(base + i);
                }
            });
        return;
    }
    let _ = exec;
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = f(k);
    }
}
