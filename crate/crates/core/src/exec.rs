//! Execution strategy for the data-parallel inner loops.
//!
//! Every parallel path collects results in input order, so outputs are
//! identical whichever strategy runs them. Without the `parallel` feature
//! `Exec::Parallel` silently degrades to the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    pub fn map_indices<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Strategy for a worker count: 1 is sequential, 0 means every core.
    /// A count above 1 sizes the global pool; this only takes effect
    /// before the pool's first use.
    pub fn with_jobs(jobs: usize) -> Self {
        if jobs == 1 {
            return Exec::Sequential;
        }
        #[cfg(feature = "parallel")]
        if jobs > 1 {
            // fails harmlessly when the pool already exists
            let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
        }
        Exec::Parallel
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_strategies_preserve_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Exec::Sequential.map(&items, |x| x * x);
        let par = Exec::Parallel.map(&items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(Exec::Parallel.map_indices(10, |i| i), (0..10).collect::<Vec<_>>());
    }
}
