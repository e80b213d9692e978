//! Execution policy for data-parallel loops.
//!
//! With the `parallel` feature (on by default) `Exec::Parallel` fans work
//! out over the rayon pool; without it every loop runs sequentially and the
//! results are identical, since each work item owns its own RNG stream.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel. Output order is always
/// index order.
pub fn map_indices<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Apply `f` to consecutive chunks of `out` (with the chunk's starting
/// offset), summing the returned counts.
pub fn chunked_sum<T, F>(exec: Exec, out: &mut [T], chunk: usize, f: F) -> u64
where
    T: Send,
    F: Fn(usize, &mut [T]) -> u64 + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return out
            .par_chunks_mut(chunk)
            .enumerate()
            .map(|(i, c)| f(i * chunk, c))
            .sum();
    }
    let _ = exec;
    out.chunks_mut(chunk)
        .enumerate()
        .map(|(i, c)| f(i * chunk, c))
        .sum()
}

/// Size the global worker pool. Only the first call has any effect.
pub fn set_threads(n: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_policies_agree() {
        let a = map_indices(Exec::Sequential, 100, |i| i * i);
        let b = map_indices(Exec::Parallel, 100, |i| i * i);
        assert_eq!(a, b);

        let mut xs = vec![1u64; 1000];
        let s = chunked_sum(Exec::Parallel, &mut xs, 64, |off, c| {
            c.iter_mut().for_each(|x| *x += off as u64);
            c.len() as u64
        });
        assert_eq!(s, 1000);
        assert_eq!(xs[64], 65);
    }
}
