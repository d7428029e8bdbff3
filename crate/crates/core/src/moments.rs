//! Moments of products of the noise field phi(f) = sum_k f(k/n) eps_k / sqrt(n)
//! where the eps_k are independent uniform signs on the grid {k/n : k=1..n}.
//!
//! Three engines compute E[phi^{q1}(f1) ... phi^{qj}(fj)]:
//! - [`moment_bruteforce`]: exact average over all 2^n sign vectors.
//! - [`moment_partition_formula`]: sum over even-block set partitions,
//!   each block weighted by its combinatorial coefficient and grid sum.
//! - [`moment_montecarlo`]: seeded estimator with a standard error.
//!
//! The first two must agree to floating-point accuracy; the third is the
//! statistical cross-check.

use num_traits::ToPrimitive;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::accum::{inv_root_scale, par_sum, par_sum2, KahanSum};
use crate::error::{Error, Result};
use crate::funcgrid::{weighted_grid_sum, GridFunction};
use crate::numbers::block_coefficient;
use crate::partitions::{enumerate_even_partitions, VertexLabeling};
use crate::Caps;

/// Enumerating sign vectors as u64 masks needs n to fit one word; the cap
/// below this bound is what actually keeps runs affordable.
const MAX_ORACLE_N: usize = 40;

/// The product E[phi^{q1}(f1) ... phi^{qj}(fj)] to be computed: univariate
/// factors on a shared grid, each with a positive power.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSpec {
    factors: Vec<(GridFunction, usize)>,
    n: usize,
}

impl MomentSpec {
    pub fn new(factors: Vec<(GridFunction, usize)>) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::Invalid("moment spec needs at least one factor".into()))?;
        let n = first.0.n();
        for (f, power) in &factors {
            if f.arity() != 1 {
                return Err(Error::GridMismatch {
                    message: format!("moment factors must have arity 1, got {}", f.arity()),
                });
            }
            if f.n() != n {
                return Err(Error::GridMismatch {
                    message: format!("factor grid sizes differ: {} vs {n}", f.n()),
                });
            }
            if *power == 0 {
                return Err(Error::Invalid("factor powers must be positive".into()));
            }
        }
        Ok(MomentSpec { factors, n })
    }

    pub fn factors(&self) -> &[(GridFunction, usize)] {
        &self.factors
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total degree K = sum of the powers.
    pub fn total_degree(&self) -> usize {
        self.factors.iter().map(|(_, q)| q).sum()
    }

    /// Vertex labeling with q_i contiguous vertices per factor.
    pub fn labeling(&self) -> VertexLabeling {
        let counts: Vec<usize> = self.factors.iter().map(|(_, q)| *q).collect();
        VertexLabeling::from_counts(&counts).expect("powers are positive")
    }
}

/// One realization of the sign sequence (eps_1 .. eps_n), stored as +-1.0.
#[derive(Clone, Debug, PartialEq)]
pub struct SignVector {
    signs: Vec<f64>,
}

impl SignVector {
    pub fn new(signs: Vec<f64>) -> Result<Self> {
        if signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
            return Err(Error::Invalid("sign vector entries must be +-1".into()));
        }
        Ok(SignVector { signs })
    }

    /// Decode a bitmask: bit k (from the least significant end) gives the
    /// sign at grid point k+1, set bit = +1. The brute-force engines use
    /// the same convention, so masks and vectors are interchangeable.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        let signs = (0..n)
            .map(|k| if mask >> k & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        SignVector { signs }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }
}

/// Monte Carlo run parameters. The same (seed, samples, n) triple always
/// reproduces the same estimate bit for bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::Invalid("sample count must be positive".into()));
        }
        Ok(McConfig { samples, seed })
    }
}

/// The sign vector of one Monte Carlo sample: stream `sample_index` of a
/// ChaCha8 generator seeded with `seed`, consuming 64-bit words least
/// significant bit first, set bit = +1. Fixed here so every sampler in the
/// crate (and any external reimplementation) draws identical paths.
pub fn draw_signs(seed: u64, sample_index: u64, n: usize) -> SignVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    let mut signs = Vec::with_capacity(n);
    while signs.len() < n {
        let mut word = rng.next_u64();
        for _ in 0..64 {
            if signs.len() == n {
                break;
            }
            signs.push(if word & 1 == 1 { 1.0 } else { -1.0 });
            word >>= 1;
        }
    }
    SignVector { signs }
}

/// Evaluate phi(f) = sum_k f(k/n) eps_k / sqrt(n) on one sign vector.
pub fn phi_eval(f: &GridFunction, eps: &SignVector) -> Result<f64> {
    if f.arity() != 1 || f.n() != eps.len() {
        return Err(Error::GridMismatch {
            message: format!(
                "phi needs an arity-1 function on the sign grid: n={}, signs={}",
                f.n(),
                eps.len()
            ),
        });
    }
    let mut acc = KahanSum::default();
    for (v, s) in f.values().iter().zip(&eps.signs) {
        acc.add(v * s);
    }
    Ok(acc.value() / (f.n() as f64).sqrt())
}

/// Exact moment by averaging the factor product over all 2^n sign vectors.
pub fn moment_bruteforce(spec: &MomentSpec, caps: &Caps) -> Result<f64> {
    let n = spec.n;
    let cap = caps.oracle_n.min(MAX_ORACLE_N);
    if n > cap {
        return Err(Error::Capacity {
            what: "brute-force grid size n",
            requested: n as u128,
            cap: cap as u128,
        });
    }
    let prepared: Vec<(&[f64], i32)> = spec
        .factors
        .iter()
        .map(|(f, q)| (f.values(), *q as i32))
        .collect();
    let total = par_sum(1u64 << n, |mask| {
        let mut prod = 1.0;
        for (values, power) in &prepared {
            let mut s = 0.0;
            for (k, v) in values.iter().enumerate() {
                s += if mask >> k & 1 == 1 { *v } else { -*v };
            }
            prod *= s.powi(*power);
        }
        prod
    });
    Ok(total / (1u64 << n) as f64 * inv_root_scale(n, spec.total_degree()))
}

/// Exact moment as a sum over partitions of the K phi-factors into even
/// blocks: each block of size 2p contributes its coefficient
/// (-1)^(p+1) |B_2p| 2^2p (2^2p - 1) / 2p times the grid sum of its
/// functions. Blocks of odd size drop out for symmetric signs, which is
/// why odd total degree returns 0 with no enumeration at all.
pub fn moment_partition_formula(spec: &MomentSpec, caps: &Caps) -> Result<f64> {
    if spec.total_degree() % 2 == 1 {
        return Ok(0.0);
    }
    let vertex_function: Vec<&GridFunction> = spec
        .factors
        .iter()
        .flat_map(|(f, q)| std::iter::repeat(f).take(*q))
        .collect();
    even_partition_sum(&vertex_function, &spec.labeling(), false, caps)
}

/// Sum over even-block partitions of the product of per-block coefficient
/// times weighted grid sum; `vertex_function[v-1]` is vertex v's factor.
/// The plain moment formula runs this without exclusion; the Wick-product
/// engines run it with the same-multiplier exclusion switched on.
pub(crate) fn even_partition_sum(
    vertex_function: &[&GridFunction],
    labeling: &VertexLabeling,
    exclude_same_multiplier: bool,
    caps: &Caps,
) -> Result<f64> {
    let k_total = labeling.total();
    let mut coeff = vec![0.0; k_total + 1];
    for size in (2..=k_total).step_by(2) {
        coeff[size] = block_coefficient(size)?
            .to_f64()
            .ok_or_else(|| Error::Overflow(format!("block coefficient for size {size}")))?;
    }
    let mut acc = KahanSum::default();
    for partition in enumerate_even_partitions(labeling, exclude_same_multiplier, caps)? {
        let mut term = 1.0;
        for block in &partition.blocks {
            let functions: Vec<&GridFunction> =
                block.iter().map(|&v| vertex_function[v - 1]).collect();
            term *= coeff[block.len()] * weighted_grid_sum(&functions)?;
        }
        acc.add(term);
    }
    Ok(acc.value())
}

/// Monte Carlo estimate of the moment: sample mean over `cfg.samples`
/// sign vectors drawn with [`draw_signs`], plus its standard error
/// (0 when only one sample was requested).
pub fn moment_montecarlo(spec: &MomentSpec, cfg: &McConfig) -> (f64, f64) {
    let n = spec.n;
    let scale = (n as f64).sqrt().recip();
    let (sum, sum_sq) = par_sum2(cfg.samples, |sample| {
        let eps = draw_signs(cfg.seed, sample, n);
        let mut prod = 1.0;
        for (f, q) in &spec.factors {
            let mut s = KahanSum::default();
            for (v, sign) in f.values().iter().zip(&eps.signs) {
                s.add(v * sign);
            }
            prod *= (s.value() * scale).powi(*q as i32);
        }
        (prod, prod * prod)
    });
    let samples = cfg.samples as f64;
    let estimate = sum / samples;
    if cfg.samples < 2 {
        return (estimate, 0.0);
    }
    let variance = ((sum_sq - samples * estimate * estimate) / (samples - 1.0)).max(0.0);
    (estimate, (variance / samples).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcgrid::{parse_expr, sample};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid(src: &str, n: usize) -> GridFunction {
        sample(&parse_expr(src, 1).unwrap(), n).unwrap()
    }

    fn spec_of(factors: &[(&str, usize)], n: usize) -> MomentSpec {
        MomentSpec::new(
            factors
                .iter()
                .map(|(src, q)| (grid(src, n), *q))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn phi_eval_examples() {
        let ones = grid("1", 4);
        assert_eq!(
            phi_eval(&ones, &SignVector::from_mask(0b1111, 4)).unwrap(),
            2.0
        );
        let ones2 = grid("1", 2);
        assert_eq!(
            phi_eval(&ones2, &SignVector::from_mask(0b01, 2)).unwrap(),
            0.0
        );
        let x = grid("x", 2);
        assert_relative_eq!(
            phi_eval(&x, &SignVector::from_mask(0b11, 2)).unwrap(),
            1.5 / 2.0_f64.sqrt(),
            max_relative = 1e-15
        );
        assert!(phi_eval(&x, &SignVector::from_mask(0, 3)).is_err());
    }

    #[test]
    fn sign_vector_validation_and_mask_convention() {
        assert!(SignVector::new(vec![1.0, -1.0]).is_ok());
        assert!(SignVector::new(vec![0.5]).is_err());
        let eps = SignVector::from_mask(0b0101, 4);
        assert_eq!(eps.signs(), &[1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn bruteforce_examples() {
        let caps = Caps::default();
        assert!(moment_bruteforce(&spec_of(&[("x", 1)], 5), &caps)
            .unwrap()
            .abs() < 1e-14);
        assert_relative_eq!(
            moment_bruteforce(&spec_of(&[("1", 2)], 3), &caps).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            moment_bruteforce(&spec_of(&[("1", 4)], 2), &caps).unwrap(),
            2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn bruteforce_cap() {
        let caps = Caps {
            oracle_n: 10,
            ..Caps::default()
        };
        assert!(matches!(
            moment_bruteforce(&spec_of(&[("x", 2)], 11), &caps),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn formula_examples() {
        let caps = Caps::default();
        let f = grid("x", 5);
        let second = moment_partition_formula(
            &MomentSpec::new(vec![(f.clone(), 2)]).unwrap(),
            &caps,
        )
        .unwrap();
        let expected: f64 = (1..=5).map(|i| (i as f64 / 5.0).powi(2)).sum::<f64>() / 5.0;
        assert_relative_eq!(second, expected, max_relative = 1e-15);

        assert_relative_eq!(
            moment_partition_formula(&spec_of(&[("1", 4)], 2), &caps).unwrap(),
            2.0,
            max_relative = 1e-15
        );

        let odd = spec_of(&[("x", 1), ("x^2", 1), ("1", 1)], 4);
        assert_eq!(moment_partition_formula(&odd, &caps).unwrap(), 0.0);
    }

    #[test]
    fn engines_agree_on_mixed_products() {
        let caps = Caps::default();
        for (factors, n) in [
            (vec![("x", 2usize), ("1 - x", 2)], 6usize),
            (vec![("sin(2 * x)", 4)], 5),
            (vec![("x", 1), ("x^2", 1), ("cos(x)", 2)], 7),
            (vec![("exp(x)", 6)], 4),
            (vec![("x", 3), ("1", 3)], 3),
        ] {
            let spec = spec_of(&factors, n);
            let formula = moment_partition_formula(&spec, &caps).unwrap();
            let oracle = moment_bruteforce(&spec, &caps).unwrap();
            assert!(
                (formula - oracle).abs() <= 1e-10 * (1.0 + oracle.abs()),
                "{factors:?} n={n}: formula {formula} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn multilinearity_in_a_power_one_factor() {
        let caps = Caps::default();
        let n = 6;
        let f = grid("x", n);
        let g = grid("cos(3 * x)", n);
        let h = grid("1 - x^2", n);
        let (a, b) = (0.7, -1.3);
        let combo = GridFunction::linear_combination(a, &f, b, &g).unwrap();
        for engine in [moment_bruteforce, moment_partition_formula] {
            let lhs = engine(
                &MomentSpec::new(vec![(combo.clone(), 1), (h.clone(), 3)]).unwrap(),
                &caps,
            )
            .unwrap();
            let with_f = engine(
                &MomentSpec::new(vec![(f.clone(), 1), (h.clone(), 3)]).unwrap(),
                &caps,
            )
            .unwrap();
            let with_g = engine(
                &MomentSpec::new(vec![(g.clone(), 1), (h.clone(), 3)]).unwrap(),
                &caps,
            )
            .unwrap();
            assert_relative_eq!(lhs, a * with_f + b * with_g, max_relative = 1e-12);
        }
    }

    #[test]
    fn montecarlo_matches_known_second_moment() {
        let spec = spec_of(&[("1", 2)], 100);
        let cfg = McConfig::new(100_000, 7).unwrap();
        let (estimate, std_error) = moment_montecarlo(&spec, &cfg);
        assert!(std_error > 0.0);
        assert!(
            (estimate - 1.0).abs() <= 4.0 * std_error,
            "estimate {estimate} +- {std_error}"
        );

        let odd = spec_of(&[("x", 1)], 50);
        let (est, se) = moment_montecarlo(&odd, &cfg);
        assert!(est.abs() <= 4.0 * se);
    }

    #[test]
    fn montecarlo_is_deterministic() {
        let spec = spec_of(&[("x", 2), ("1", 2)], 33);
        let cfg = McConfig::new(4096 * 3 + 17, 123).unwrap();
        let first = moment_montecarlo(&spec, &cfg);
        let second = moment_montecarlo(&spec, &cfg);
        assert_eq!(first, second);
    }

    #[test]
    fn montecarlo_matches_oracle_within_five_sigma() {
        let caps = Caps::default();
        let spec = spec_of(&[("x", 2), ("cos(x)", 2)], 9);
        let oracle = moment_bruteforce(&spec, &caps).unwrap();
        let (estimate, std_error) =
            moment_montecarlo(&spec, &McConfig::new(200_000, 42).unwrap());
        assert!(
            (estimate - oracle).abs() <= 5.0 * std_error,
            "estimate {estimate} +- {std_error} vs oracle {oracle}"
        );
    }

    #[test]
    fn draw_signs_is_reproducible_and_stream_split() {
        let a = draw_signs(9, 0, 130);
        let b = draw_signs(9, 0, 130);
        assert_eq!(a, b);
        assert_eq!(a.len(), 130);
        assert!(a.signs().iter().all(|s| *s == 1.0 || *s == -1.0));
        let c = draw_signs(9, 1, 130);
        assert_ne!(a, c);
        // prefix consistency: shorter draws are prefixes of longer ones
        let short = draw_signs(9, 0, 7);
        assert_eq!(short.signs(), &a.signs()[..7]);
    }

    #[test]
    fn spec_validation() {
        assert!(MomentSpec::new(vec![]).is_err());
        assert!(MomentSpec::new(vec![(grid("x", 3), 0)]).is_err());
        assert!(MomentSpec::new(vec![(grid("x", 3), 1), (grid("x", 4), 1)]).is_err());
        let multi = sample(&parse_expr("x1 * x2", 2).unwrap(), 3).unwrap();
        assert!(MomentSpec::new(vec![(multi, 2)]).is_err());
        let ok = spec_of(&[("x", 2), ("1", 3)], 4);
        assert_eq!(ok.total_degree(), 5);
        assert_eq!(ok.labeling().total(), 5);
    }

    fn factor_strategy() -> impl Strategy<Value = (Vec<f64>, usize)> {
        (
            proptest::collection::vec(-1.0f64..1.0, 1..=6),
            1usize..=3,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// The partition formula agrees with the exhaustive oracle on
        /// random grids, and odd total degree is exactly zero.
        #[test]
        fn formula_matches_oracle_on_random_specs(
            n in 1usize..=6,
            raw in proptest::collection::vec(factor_strategy(), 1..=3),
        ) {
            let caps = Caps::default();
            let factors: Vec<(GridFunction, usize)> = raw
                .iter()
                .map(|(values, q)| {
                    let cycled: Vec<f64> =
                        (0..n).map(|k| values[k % values.len()]).collect();
                    (GridFunction::new(n, 1, cycled).unwrap(), *q)
                })
                .collect();
            let spec = MomentSpec::new(factors).unwrap();
            prop_assume!(spec.total_degree() <= 8);
            let formula = moment_partition_formula(&spec, &caps).unwrap();
            let oracle = moment_bruteforce(&spec, &caps).unwrap();
            prop_assert!(
                (formula - oracle).abs() <= 1e-10 * (1.0 + oracle.abs()),
                "formula {} vs oracle {}", formula, oracle
            );
            if spec.total_degree() % 2 == 1 {
                prop_assert_eq!(formula, 0.0);
                prop_assert!(oracle.abs() < 1e-12);
            }
        }
    }
}
