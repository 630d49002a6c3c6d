//! Data-parallel fill helper with a sequential fallback.
//!
//! Every parallel loop in the crate computes each output element with its own
//! sequential reduction, so results are bit-identical with and without the
//! `parallel` feature and independent of the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this length the rayon dispatch overhead outweighs the work.
#[cfg(feature = "parallel")]
const MIN_PAR_LEN: usize = 2048;

/// Computes `out[i] = f(i)` for every index, in parallel when worthwhile.
pub(crate) fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if out.len() >= MIN_PAR_LEN {
            out.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
            return;
        }
    }
    for (i, v) in out.iter_mut().enumerate() {
        *v = f(i);
    }
}
