//! Index-addressed parallel map with a sequential fallback.
//!
//! With the `parallel` feature (on by default) work items run on the current
//! rayon pool; without it the same closure runs in a plain loop. Results come
//! back in index order either way, and every item derives its randomness from
//! its index, so the two modes are bit-for-bit identical.

#[cfg(feature = "parallel")]
pub(crate) fn par_map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}
