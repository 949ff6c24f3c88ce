//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) these run on the ambient rayon
//! pool; without it they are plain loops. Every helper returns results in
//! input order, and reductions are performed over fixed-size blocks that are
//! combined left to right, so floating-point output does not depend on the
//! number of worker threads.

use num_complex::Complex64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Block length used by the deterministic reductions.
pub const REDUCE_BLOCK: usize = 4096;

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
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

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sums `f(i)` for `i` in `start..end`. Blocks of [`REDUCE_BLOCK`] indices are
/// summed independently (possibly in parallel) and the block totals are then
/// added in order.
pub fn sum_range<F>(start: usize, end: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync + Send,
{
    sum_range_multi::<1, _>(start, end, |i| [f(i)])[0]
}

/// Like [`sum_range`] but accumulates `N` quantities at once.
pub fn sum_range_multi<const N: usize, F>(start: usize, end: usize, f: F) -> [Complex64; N]
where
    F: Fn(usize) -> [Complex64; N] + Sync + Send,
{
    if end <= start {
        return [Complex64::new(0.0, 0.0); N];
    }
    let blocks = (end - start).div_ceil(REDUCE_BLOCK);
    let partials = map_range(blocks, |b| {
        let lo = start + b * REDUCE_BLOCK;
        let hi = (lo + REDUCE_BLOCK).min(end);
        let mut acc = [Complex64::new(0.0, 0.0); N];
        for i in lo..hi {
            let terms = f(i);
            for (a, t) in acc.iter_mut().zip(terms) {
                *a += t;
            }
        }
        acc
    });
    let mut total = [Complex64::new(0.0, 0.0); N];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Runs `f` on a pool with `jobs` worker threads (`0` means the default pool).
pub fn with_jobs<R: Send, F: FnOnce() -> R + Send>(jobs: usize, f: F) -> R {
    #[cfg(feature = "parallel")]
    {
        if jobs == 0 {
            return f();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        f()
    }
}

/// Number of worker threads available to the helpers above.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_thread_count_independent() {
        let f = |i: usize| Complex64::new((i as f64).sin(), 1.0 / (1.0 + i as f64));
        let a = with_jobs(1, || sum_range(3, 50_000, f));
        let b = with_jobs(7, || sum_range(3, 50_000, f));
        assert_eq!(a, b);
    }

    #[test]
    fn map_preserves_order() {
        let v: Vec<usize> = (0..1000).collect();
        let out = map(&v, |x| x * 2);
        assert!(out.iter().enumerate().all(|(i, &y)| y == 2 * i));
        assert_eq!(sum_range(5, 5, |_| Complex64::new(1.0, 0.0)), Complex64::new(0.0, 0.0));
    }
}
