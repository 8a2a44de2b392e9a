//! Data-parallel helpers.
//!
//! With the `parallel` feature every helper fans out over the current rayon
//! pool; without it the same helpers run as plain sequential iterators. All
//! helpers preserve input order, so results are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map every element of a slice, preserving order.
#[cfg(feature = "parallel")]
pub fn map_slice<T, U, F>(src: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    src.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, U, F>(src: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    src.iter().map(f).collect()
}

/// Map `0..n`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Map owned items, preserving order.
#[cfg(feature = "parallel")]
pub fn map_vec<T, U, F>(src: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    src.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_vec<T, U, F>(src: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    src.into_iter().map(f).collect()
}

/// Whether this build fans work out over rayon.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
