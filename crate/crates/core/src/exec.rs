//! Deterministic chunked reductions over index ranges.
//!
//! Work is split into fixed-size chunks whose partial results are combined in
//! index order, so the sequential and parallel paths produce bit-identical
//! results regardless of thread count. Without the `parallel` feature every
//! request runs sequentially.

/// Nodes per chunk.
pub const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Whether work actually fans out across threads in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

pub fn chunked_reduce<T, I, F, M>(exec: Execution, len: usize, init: I, fold: F, merge: M) -> T
where
    T: Send,
    I: Fn() -> T + Sync + Send,
    F: Fn(&mut T, usize) + Sync + Send,
    M: Fn(&mut T, T),
{
    let chunks = len.div_ceil(CHUNK);
    let run_chunk = |c: usize| {
        let mut acc = init();
        for i in c * CHUNK..((c + 1) * CHUNK).min(len) {
            fold(&mut acc, i);
        }
        acc
    };
    let parts: Vec<T> = if exec.is_parallel() {
        parallel_map(chunks, run_chunk)
    } else {
        (0..chunks).map(run_chunk).collect()
    };
    let mut total = init();
    for part in parts {
        merge(&mut total, part);
    }
    total
}

/// Maps `0..n` in index order, in parallel when enabled.
pub fn map_indices<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if exec.is_parallel() {
        parallel_map(n, f)
    } else {
        (0..n).map(f).collect()
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}
