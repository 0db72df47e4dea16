//! Sequential / data-parallel execution switch.
//!
//! Every sweep in the crate goes through [`map`], and dense row loops go
//! through [`for_each_row`]. With the `parallel` feature disabled both run
//! sequentially and `Execution::Parallel` is accepted but ignored. Results
//! are always assembled in input order, so the two modes produce identical
//! output.

use serde::{Deserialize, Serialize};

/// Matrices smaller than this are never split across threads.
const PARALLEL_ROW_THRESHOLD: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
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
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Execution mode for a dense kernel of dimension `n`.
pub fn auto_for(n: usize) -> Execution {
    if n >= PARALLEL_ROW_THRESHOLD {
        Execution::default()
    } else {
        Execution::Sequential
    }
}

/// Order-preserving map.
pub fn map<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Calls `f(row_index, row)` for each `row_len`-sized chunk of `out`.
pub fn for_each_row<T, F>(out: &mut [T], row_len: usize, exec: Execution, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        out.par_chunks_mut(row_len).enumerate().for_each(|(i, row)| f(i, row));
        return;
    }
    let _ = exec;
    out.chunks_mut(row_len).enumerate().for_each(|(i, row)| f(i, row));
}

/// Sizes the global worker pool. Only the first call has an effect; later
/// calls (and all calls without the `parallel` feature) return `false`.
pub fn configure_threads(n: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        false
    }
}
