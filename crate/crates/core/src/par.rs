//! Internal shim selecting between rayon and plain iteration.
//!
//! Every data-parallel loop in the crate funnels through these helpers so the
//! `parallel` feature toggles one place. Both versions keep identical bounds
//! and identical output order (rayon's collect preserves input order), which
//! is what makes results independent of thread count.

#[cfg(feature = "parallel")]
pub(crate) fn map_vec<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Send + Sync,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_vec<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Send + Sync,
{
    items.into_iter().map(f).collect()
}
