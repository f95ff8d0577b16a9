//! Order-preserving batch execution, parallel when the `parallel`
//! feature is enabled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to every item and collects the results in input order.
///
/// With the `parallel` feature, `jobs = None` uses the current rayon pool,
/// `jobs = Some(k)` (k > 1) a dedicated pool of `k` threads, and
/// `jobs = Some(1)` a plain sequential loop. Without the feature the loop
/// is always sequential.
pub fn map_batch<T, U, F>(items: &[T], jobs: Option<usize>, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        match jobs {
            Some(1) => items.iter().map(f).collect(),
            Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(_) => items.par_iter().map(&f).collect(),
            },
            None => items.par_iter().map(&f).collect(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        items.iter().map(f).collect()
    }
}

/// Internal helper for data-parallel inner loops (table builds, audits).
pub(crate) fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
