//! Sequential / parallel execution switch.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How data-parallel loops run.
///
/// `Parallel` uses rayon when the `parallel` feature is enabled and silently degrades to
/// `Sequential` otherwise. Results are identical either way: every helper here preserves
/// input order, and `fold` merges fixed chunks in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Order-preserving map.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Map over index range `0..n`, order-preserving.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Fold fixed-size chunks of `items` into partial accumulators and merge them left to
    /// right. Chunk boundaries do not depend on the thread pool, so floating-point results
    /// are the same in both modes and across runs.
    ///
    /// `merge` must be associative with `identity()` as its unit.
    pub fn fold<T, A, I, F, M>(self, items: &[T], identity: I, fold: F, merge: M) -> A
    where
        T: Sync,
        A: Send,
        I: Fn() -> A + Sync + Send,
        F: Fn(A, &T) -> A + Sync + Send,
        M: Fn(A, A) -> A + Sync + Send,
    {
        let chunk = |c: &[T]| c.iter().fold(identity(), &fold);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            let partials: Vec<A> = items.par_chunks(FOLD_CHUNK).map(chunk).collect();
            return partials.into_iter().fold(identity(), &merge);
        }
        items.chunks(FOLD_CHUNK).map(chunk).fold(identity(), &merge)
    }
}

/// Items per partial accumulator in [`Exec::fold`].
pub const FOLD_CHUNK: usize = 64;
