//! Data-parallel execution helpers.
//!
//! Work items are indexed and mapped independently; reductions run as a
//! deterministic pairwise tree over the index-ordered results, so sums are
//! bit-identical no matter how many workers ran the map (and identical to
//! the sequential fallback).

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, collecting results in index order. Runs on the rayon
/// pool when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sequential reference implementation of `map_indexed`; always available so
/// determinism can be checked against the parallel path.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Pairwise (tree) summation. Deterministic for a fixed input order and more
/// accurate than a running sum on long inputs.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_matches_sequential() {
        let f = |i: usize| ((i as f64) * 0.7).sin() / (i as f64 + 1.0);
        let par = map_indexed(10_000, f);
        let seq = map_indexed_seq(10_000, f);
        assert_eq!(par, seq);
        assert_eq!(pairwise_sum(&par).to_bits(), pairwise_sum(&seq).to_bits());
    }

    #[test]
    fn pairwise_sum_small_cases() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[3.0]), 3.0);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0, 4.0, 5.0]), 15.0);
    }
}
