//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Parallelism::Parallel`] fans work
//! out over the rayon pool; without it every call runs sequentially. Results
//! always come back in input order, so any reduction the caller performs over
//! them is independent of the schedule.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    Sequential,
    Parallel,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Parallel
        } else {
            Parallelism::Sequential
        }
    }
}

impl Parallelism {
    /// Whether work actually runs on more than one thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

pub fn map<T, R, F>(par: Parallelism, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par == Parallelism::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = par;
    items.iter().map(f).collect()
}

/// `map` over `0..n`.
pub fn map_range<R, F>(par: Parallelism, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par == Parallelism::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = par;
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_preserve_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map(Parallelism::Sequential, &items, |x| x * x);
        let par = map(Parallelism::Parallel, &items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(map_range(Parallelism::Parallel, 5, |i| i), vec![0, 1, 2, 3, 4]);
    }
}
