//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) the `Parallel` strategy fans
//! work out over the rayon pool. Without it, both strategies run on the
//! calling thread, so results never depend on the feature set.

/// How a data-parallel loop is executed.
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

/// Calls `f(chunk_index, chunk)` for each `chunk_len`-sized chunk of `data`.
pub fn for_each_chunk_mut<T, F>(exec: Execution, data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
        }
        _ => data
            .chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c)),
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_indices<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let mut a: Vec<u64> = (0..1000).collect();
        let mut b = a.clone();
        let bump = |i: usize, c: &mut [u64]| c.iter_mut().for_each(|x| *x = *x * 3 + i as u64);
        for_each_chunk_mut(Execution::Sequential, &mut a, 7, bump);
        for_each_chunk_mut(Execution::Parallel, &mut b, 7, bump);
        assert_eq!(a, b);
        assert_eq!(
            map_indices(Execution::Sequential, 50, |i| i * i),
            map_indices(Execution::Parallel, 50, |i| i * i)
        );
    }
}
