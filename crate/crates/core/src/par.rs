//! Rayon when the `parallel` feature is on, plain iterators otherwise.
//!
//! Call sites write `.into_par_iter()`; without the feature that resolves to
//! `into_iter()` and the rest of the chain uses [`Iterator`] methods.

#[cfg(feature = "parallel")]
pub use rayon::prelude::*;

#[cfg(not(feature = "parallel"))]
mod sequential {
    pub trait IntoParallelIterator {
        type Iter;
        type Item;
        fn into_par_iter(self) -> Self::Iter;
    }

    impl<I: IntoIterator> IntoParallelIterator for I {
        type Iter = I::IntoIter;
        type Item = I::Item;
        fn into_par_iter(self) -> Self::Iter {
            self.into_iter()
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub use sequential::*;

/// Whether batches actually run on the rayon pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
