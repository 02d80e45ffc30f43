//! Replica-level parallelism.
//!
//! Each replica derives its own seed from its index, so the output vector is
//! identical for any worker count or scheduling.

use rayon::prelude::*;

/// Runs `f(scratch, replica)` for `replica in 0..replicas`, in index order of the result.
pub fn replicate<S, T, I, F>(replicas: usize, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> T + Sync + Send,
{
    (0..replicas).into_par_iter().map_init(init, f).collect()
}

/// Runs `op` inside a pool with `workers` threads (`None` uses the global pool).
pub fn with_workers<R: Send>(workers: Option<usize>, op: impl FnOnce() -> R + Send) -> R {
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("thread pool")
            .install(op),
        None => op(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_by_index_for_any_pool() {
        let run = |w| with_workers(Some(w), || replicate(1000, || 0u64, |s, i| {
            *s += 1;
            i * i
        }));
        let a = run(1);
        let b = run(3);
        assert_eq!(a, b);
        assert_eq!(a[31], 961);
    }
}
