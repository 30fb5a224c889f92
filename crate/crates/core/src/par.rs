//! Data-parallel helpers.
//!
//! With the `parallel` feature these dispatch to rayon; without it they are
//! plain sequential iterators. Results are always collected in input order,
//! so output never depends on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Map `f` over a slice, collecting results in order.
#[cfg(feature = "parallel")]
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Fallible [`map_range`]; returns the first error in index order.
pub fn try_map_range<R, E, F>(n: usize, f: F) -> Result<Vec<R>, E>
where
    R: Send,
    E: Send,
    F: Fn(usize) -> Result<R, E> + Sync + Send,
{
    map_range(n, f).into_iter().collect()
}

/// Fill fixed-size row chunks of `out` in parallel. `f(row, chunk)`.
#[cfg(feature = "parallel")]
pub fn for_each_row_mut<F>(out: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    out.par_chunks_mut(row_len).enumerate().for_each(|(i, row)| f(i, row));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_row_mut<F>(out: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    out.chunks_mut(row_len).enumerate().for_each(|(i, row)| f(i, row));
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
