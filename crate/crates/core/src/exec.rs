//! Execution strategy for embarrassingly parallel evaluations.
//!
//! With the default `parallel` feature the closures run on the rayon pool;
//! without it they run on a plain sequential iterator. Output ordering is
//! identical either way. Only used where each item is expensive (topology
//! candidates, pool sizing); cheap per-row arithmetic stays sequential.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub(crate) fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}
