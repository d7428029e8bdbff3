//! Compensated summation and fixed-order parallel reductions.
//!
//! Every engine promises bit-identical results for a given configuration
//! regardless of worker count. Parallel sums are therefore chunked at a
//! fixed width, accumulated sequentially inside each chunk, and the chunk
//! totals folded in index order; only the chunk *evaluation* is parallel.

use rayon::prelude::*;

/// Kahan–Neumaier compensated accumulator.
///
/// Brute-force oracles sum up to 2^20 mixed-sign terms and are compared
/// against exact engines at 1e-12 absolute; plain summation error can
/// reach that scale, compensation keeps it near one ulp of the true sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// n^(-k/2), via an integer power when k is even so that grid weights
/// like 2^-1 stay exact instead of inheriting sqrt rounding.
pub(crate) fn inv_root_scale(n: usize, k: usize) -> f64 {
    let even_part = (n as f64).powi(-((k / 2) as i32));
    if k % 2 == 0 {
        even_part
    } else {
        even_part / (n as f64).sqrt()
    }
}

/// Fixed chunk width for deterministic parallel reductions.
pub(crate) const CHUNK: u64 = 1 << 12;

/// Sum `f(i)` over `0..len` in parallel with a fixed reduction order.
pub(crate) fn par_sum<F>(len: u64, f: F) -> f64
where
    F: Fn(u64) -> f64 + Sync,
{
    let partials = par_chunk_map(len, |start, end| {
        let mut acc = KahanSum::default();
        for i in start..end {
            acc.add(f(i));
        }
        acc.value()
    });
    let mut total = KahanSum::default();
    for p in partials {
        total.add(p);
    }
    total.value()
}

/// Sum a pair `(f(i), g(i))` over `0..len`; used for mean plus second moment.
pub(crate) fn par_sum2<F>(len: u64, f: F) -> (f64, f64)
where
    F: Fn(u64) -> (f64, f64) + Sync,
{
    let partials = par_chunk_map(len, |start, end| {
        let mut a = KahanSum::default();
        let mut b = KahanSum::default();
        for i in start..end {
            let (x, y) = f(i);
            a.add(x);
            b.add(y);
        }
        (a.value(), b.value())
    });
    let mut a = KahanSum::default();
    let mut b = KahanSum::default();
    for (x, y) in partials {
        a.add(x);
        b.add(y);
    }
    (a.value(), b.value())
}

/// Map fixed-width index chunks in parallel, returning results in chunk order.
pub(crate) fn par_chunk_map<T, F>(len: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
{
    let chunks = len.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(len);
            f(start, end)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_cancellation() {
        let mut acc = KahanSum::default();
        acc.add(1e16);
        acc.add(3.25);
        acc.add(-1e16);
        assert_eq!(acc.value(), 3.25);
    }

    #[test]
    fn par_sum_matches_sequential_kahan() {
        let n = 3 * CHUNK + 17;
        let f = |i: u64| ((i % 97) as f64 - 48.0) * 0.125;
        let mut seq = KahanSum::default();
        for chunk_start in (0..n).step_by(CHUNK as usize) {
            let mut inner = KahanSum::default();
            for i in chunk_start..(chunk_start + CHUNK).min(n) {
                inner.add(f(i));
            }
            seq.add(inner.value());
        }
        assert_eq!(par_sum(n, f), seq.value());
    }
}
