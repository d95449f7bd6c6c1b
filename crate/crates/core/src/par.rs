//! Switch between the rayon path and the plain sequential path.
//!
//! Every parallel kernel in the crate partitions its output by row (or by
//! column for transposed products) and sums each output entry in a fixed
//! order, so both paths produce bit-identical results.

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
    /// Whether this build can honour the parallel path at all.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Fills `out[i] = f(i)`.
pub(crate) fn fill_indexed<F>(exec: Execution, out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel && out.len() >= PAR_MIN_LEN {
        use rayon::prelude::*;
        out.par_iter_mut()
            .with_min_len(PAR_CHUNK)
            .enumerate()
            .for_each(|(i, o)| *o = f(i));
        return;
    }
    let _ = exec;
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// Maps `0..n` to a vector, in parallel when asked to.
pub(crate) fn map_collect<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
const PAR_MIN_LEN: usize = 256;
#[cfg(feature = "parallel")]
const PAR_CHUNK: usize = 64;
