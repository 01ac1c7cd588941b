//! Deterministic reductions.
//!
//! Every reduction in the crate goes through [`sum_map`]: values are split
//! into fixed blocks of [`BLOCK`] elements, each block is summed pairwise,
//! and the block partials are summed pairwise again. The grouping depends
//! only on the length of the input, never on the number of worker threads.

use rayon::prelude::*;

pub const BLOCK: usize = 4096;
const LEAF: usize = 32;
const PAR_THRESHOLD: usize = 4 * BLOCK;

fn pairwise<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
    let len = hi - lo;
    if len <= LEAF {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    } else {
        let mid = lo + len / 2;
        pairwise(lo, mid, f) + pairwise(mid, hi, f)
    }
}

/// Sum of `f(i)` for `i in 0..len`.
pub fn sum_map<F: Fn(usize) -> f64 + Sync>(len: usize, f: F) -> f64 {
    if len == 0 {
        return 0.0;
    }
    let blocks = len.div_ceil(BLOCK);
    let partial = |b: usize| pairwise(b * BLOCK, ((b + 1) * BLOCK).min(len), &f);
    let partials: Vec<f64> = if len >= PAR_THRESHOLD {
        (0..blocks).into_par_iter().map(partial).collect()
    } else {
        (0..blocks).map(partial).collect()
    };
    pairwise(0, partials.len(), &|i| partials[i])
}

pub fn sum(values: &[f64]) -> f64 {
    sum_map(values.len(), |i| values[i])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_map(a.len(), |i| a[i] * b[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_on_small_input() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(sum(&v), 4950.0);
    }

    #[test]
    fn independent_of_thread_count() {
        let v: Vec<f64> = (0..100_003).map(|i| ((i as f64) * 0.37).sin()).collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sum(&v));
        let b = four.install(|| sum(&v));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(sum(&[]), 0.0);
    }
}
