//! Exact special-number arithmetic: binomials, Bernoulli numbers,
//! Eulerian numbers, and the per-block diagram coefficient.
//!
//! Everything here is integer or rational arithmetic over arbitrary
//! precision; block coefficients up to size 20 already overflow 64-bit
//! intermediates. No floating point enters this module.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar. Always stored reduced with a positive denominator.
pub type Rational = BigRational;

/// Binomial coefficient C(n, k).
pub fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Bernoulli number B_m in the convention B_1 = -1/2.
///
/// Computed from the recurrence sum_{j=0}^{m} C(m+1, j) B_j = 0 with
/// B_0 = 1; odd indices above 1 are zero.
pub fn bernoulli_number(m: u32) -> Rational {
    if m > 1 && m % 2 == 1 {
        return Rational::zero();
    }
    let mut table: Vec<Rational> = Vec::with_capacity(m as usize + 1);
    table.push(Rational::one());
    for r in 1..=m {
        let mut acc = Rational::zero();
        for (j, b) in table.iter().enumerate() {
            if !b.is_zero() {
                acc += Rational::from(binomial(r + 1, j as u32)) * b;
            }
        }
        table.push(-acc / Rational::from(BigInt::from(r + 1)));
    }
    table.pop().expect("table is nonempty")
}

/// Eulerian number E(n, l): permutations of {1..n} with exactly l ascents.
///
/// E(0, 0) = 1 for the empty permutation; E(n, l) = 0 for l >= n when
/// n >= 1. Recurrence E(n, l) = (l+1) E(n-1, l) + (n-l) E(n-1, l-1).
pub fn eulerian_number(n: u32, l: u32) -> BigInt {
    if n == 0 {
        return if l == 0 { BigInt::one() } else { BigInt::zero() };
    }
    if l >= n {
        return BigInt::zero();
    }
    let width = n as usize;
    let mut row = vec![BigInt::zero(); width];
    row[0] = BigInt::one(); // E(1, 0)
    for r in 2..=n {
        let mut next = vec![BigInt::zero(); width];
        for j in 0..r as usize {
            let mut v = BigInt::zero();
            if j < r as usize - 1 {
                v += BigInt::from(j as u32 + 1) * &row[j];
            }
            if j > 0 {
                v += BigInt::from(r - j as u32) * &row[j - 1];
            }
            next[j] = v;
        }
        row = next;
    }
    row[l as usize].clone()
}

fn require_even(size: usize) -> Result<u32> {
    if size == 0 || size % 2 != 0 {
        return Err(Error::OddBlockSize(size));
    }
    u32::try_from(size).map_err(|_| Error::Overflow(format!("block size {size}")))
}

/// Weight of a partition block of even size 2p in the moment formulas:
/// (-1)^(p+1) |B_2p| 2^2p (2^2p - 1) / (2p).
///
/// The value is always integer (sizes 2, 4, 6 give 1, -2, 16) but is
/// returned as a [`Rational`] for exact comparisons.
pub fn block_coefficient(size: usize) -> Result<Rational> {
    let size = require_even(size)?;
    let p = size / 2;
    let sign = if p % 2 == 1 { 1 } else { -1 };
    let pow = BigInt::one() << size; // 2^2p
    let numer = bernoulli_number(size).abs() * Rational::from(&pow * (&pow - 1));
    Ok(Rational::from(BigInt::from(sign)) * numer / Rational::from(BigInt::from(size)))
}

/// Alternating Eulerian sum over one block:
/// sum_{l=0}^{size-1} (-1)^l E(size-1, l).
///
/// Equals [`block_coefficient`] exactly for every even size; the diagram
/// engine relies on that identity to collapse per-block traversal signs.
pub fn alternating_eulerian_sum(size: usize) -> Result<Rational> {
    let size = require_even(size)?;
    let mut acc = BigInt::zero();
    for l in 0..size {
        let term = eulerian_number(size - 1, l);
        if l % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    Ok(Rational::from(acc))
}
