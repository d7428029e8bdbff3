//! Exact calculus for Bernoulli noise: the random field phi(f) built from
//! independent signs on a uniform grid, its product moments, Wick powers,
//! diagram expansions, and the Gaussian objects they converge to.
//!
//! Layout:
//! - [`numbers`]: Bernoulli numbers, Eulerian numbers, block coefficients.
//! - [`funcgrid`]: expression parsing and grid-sampled functions.
//! - [`partitions`]: even set partitions, traversals, diagrams.
//! - [`moments`]: brute-force, combinatorial, and Monte Carlo moment engines.
//! - [`wick`]: Wick polynomials and the stochastic exponent.
//! - [`diagrams`]: diagram sums for Wick products and the Gaussian limit.
//! - [`hermite`]: k-linear forms and Hermite chaos limits.
//! - [`stats`]: distribution checks used by the sampling tests.
//! - [`acceptance`]: the end-to-end verification battery.

pub(crate) mod accum;
pub mod acceptance;
pub mod diagrams;
pub mod error;
pub mod funcgrid;
pub mod hermite;
pub mod moments;
pub mod numbers;
pub mod partitions;
pub mod stats;
pub mod wick;

pub use error::{Error, Result};

/// Resource ceilings for the exponential-cost engines. Every engine that
/// enumerates sign vectors, partitions, or traversals takes its limit from
/// here so callers can widen or tighten all of them in one place.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    /// Largest grid size for 2^n brute-force enumeration.
    pub oracle_n: usize,
    /// Largest total degree K for partition enumeration.
    pub partition_k: usize,
    /// Largest number of traversal combinations a diagram sum may visit.
    pub traversal_budget: u64,
    /// Largest number of monomials an expanded Wick product may produce.
    pub expansion_cap: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            oracle_n: 20,
            partition_k: 16,
            traversal_budget: 1_000_000,
            expansion_cap: 1_000_000,
        }
    }
}
