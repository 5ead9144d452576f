//! Internal helpers that run a map either on the rayon pool (feature
//! `parallel`, default) or sequentially with identical semantics.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map over owned items, preserving order.
#[cfg(feature = "parallel")]
pub(crate) fn map_vec<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_vec<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}
