//! k-linear forms over the sign field and their Gaussian chaos limits.
//!
//! A_k^n(eps) = n^(-k/2) sum over pairwise distinct (i_1..i_k) of
//! f(i_1/n, .., i_k/n) eps_{i_1} ... eps_{i_k}. These forms are pairwise
//! orthogonal across different k, and as the grid refines they converge to
//! Hermite functionals of white noise: each basis monomial
//! psi_{m_1} x .. x psi_{m_k} turns into a Wick product of the Gaussian
//! variables (psi_m, xi), with repeated factors producing Hermite powers.
//! The module computes both sides exactly, plus seeded sampling checks for
//! the scalar and joint central limit behaviour of phi(f) itself.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::accum::{inv_root_scale, par_chunk_map, KahanSum};
use crate::error::{Error, Result};
use crate::funcgrid::{riemann_inner_product, sample, Expr, GridFunction};
use crate::moments::{draw_signs, phi_eval, McConfig, SignVector};
use crate::partitions::{enumerate_pair_partitions, next_permutation, VertexLabeling};
use crate::stats::{cf_distance_2d, ks_distance, normal_cdf};
use crate::Caps;

/// A finitely supported coefficient family c_{m_1..m_k} over a basis
/// psi_1..psi_M, describing f(x_1..x_k) = sum c * psi_{m_1}(x_1) ...
/// psi_{m_k}(x_k). Kept symbolic (expressions, not grids) so the same
/// family can be sampled at every grid size of a convergence run.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiIndexCoeffs {
    k: usize,
    basis: Vec<Expr>,
    coeffs: BTreeMap<Vec<usize>, f64>,
}

impl MultiIndexCoeffs {
    pub fn new(basis: Vec<Expr>, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::Invalid("basis must be nonempty".into()));
        }
        if basis.iter().any(|e| e.arity() != 1) {
            return Err(Error::Invalid("basis functions must have arity 1".into()));
        }
        for (a, ea) in basis.iter().enumerate() {
            if basis[a + 1..].contains(ea) {
                return Err(Error::Invalid(format!(
                    "basis function {} appears twice",
                    a + 1
                )));
            }
        }
        let k = match entries.first() {
            Some((tuple, _)) if !tuple.is_empty() => tuple.len(),
            _ => return Err(Error::Invalid("need at least one coefficient tuple".into())),
        };
        let mut coeffs = BTreeMap::new();
        for (tuple, c) in entries {
            if tuple.len() != k {
                return Err(Error::Invalid(format!(
                    "tuple {tuple:?} does not have arity {k}"
                )));
            }
            if tuple.iter().any(|&m| m == 0 || m > basis.len()) {
                return Err(Error::Invalid(format!(
                    "tuple {tuple:?} indexes outside the {}-function basis",
                    basis.len()
                )));
            }
            if !c.is_finite() {
                return Err(Error::Invalid(format!("coefficient {c} for {tuple:?}")));
            }
            coeffs.insert(tuple, c);
        }
        Ok(MultiIndexCoeffs { k, basis, coeffs })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn basis(&self) -> &[Expr] {
        &self.basis
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&Vec<usize>, f64)> {
        self.coeffs.iter().map(|(t, c)| (t, *c))
    }
}

/// The smooth orthonormal family used by the convergence tests:
/// psi_1 = 1 and psi_m = sqrt(2) cos((m-1) pi x) for m >= 2.
pub fn cosine_basis(m: usize) -> Result<Expr> {
    if m == 0 {
        return Err(Error::Invalid("basis index starts at 1".into()));
    }
    if m == 1 {
        return crate::funcgrid::parse_expr("1", 1);
    }
    let frequency = std::f64::consts::PI * (m - 1) as f64;
    crate::funcgrid::parse_expr(
        &format!("{} * cos({} * x)", std::f64::consts::SQRT_2, frequency),
        1,
    )
}

enum KFormBody {
    Grid(GridFunction),
    Product {
        basis_values: Vec<GridFunction>,
        terms: Vec<(Vec<usize>, f64)>,
        /// set partitions of the k positions, for inclusion-exclusion
        position_partitions: Vec<Vec<Vec<usize>>>,
    },
}

/// One k-linear form at a fixed grid size, backed either by an arity-k
/// grid of raw values or by a basis-product coefficient family.
pub struct KForm {
    n: usize,
    k: usize,
    body: KFormBody,
}

impl KForm {
    pub fn from_grid(f: GridFunction) -> KForm {
        KForm {
            n: f.n(),
            k: f.arity(),
            body: KFormBody::Grid(f),
        }
    }

    pub fn from_coeffs(coeffs: &MultiIndexCoeffs, n: usize) -> Result<KForm> {
        let basis_values = coeffs
            .basis
            .iter()
            .map(|e| sample(e, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(KForm {
            n,
            k: coeffs.k,
            body: KFormBody::Product {
                basis_values,
                terms: coeffs.coeffs().map(|(t, c)| (t.clone(), c)).collect(),
                position_partitions: set_partitions(coeffs.k),
            },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// f at a 1-based index tuple, whatever the backing.
    fn point_value(&self, idx: &[usize]) -> f64 {
        match &self.body {
            KFormBody::Grid(f) => f.value(idx),
            KFormBody::Product {
                basis_values,
                terms,
                ..
            } => terms
                .iter()
                .map(|(tuple, c)| {
                    c * tuple
                        .iter()
                        .zip(idx)
                        .map(|(&m, &i)| basis_values[m - 1].value_at(i))
                        .product::<f64>()
                })
                .sum(),
        }
    }
}

/// All set partitions of {0..k-1}, blocks ascending, in a fixed order.
fn set_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    fn go(pos: usize, k: usize, acc: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if pos == k {
            out.push(acc.clone());
            return;
        }
        for i in 0..acc.len() {
            acc[i].push(pos);
            go(pos + 1, k, acc, out);
            acc[i].pop();
        }
        acc.push(vec![pos]);
        go(pos + 1, k, acc, out);
        acc.pop();
    }
    let mut out = Vec::new();
    go(0, k, &mut Vec::new(), &mut out);
    out
}

fn all_distinct(idx: &[usize]) -> bool {
    idx.iter()
        .enumerate()
        .all(|(a, i)| idx[a + 1..].iter().all(|j| j != i))
}

/// Step a 1-based odometer over {1..n}^k; false after the last tuple.
fn advance(idx: &mut [usize], n: usize) -> bool {
    for slot in idx.iter_mut().rev() {
        if *slot < n {
            *slot += 1;
            return true;
        }
        *slot = 1;
    }
    false
}

/// Evaluate A_k^n on one sign vector: the distinct-index sum directly for
/// grid-backed forms, or by inclusion-exclusion over position partitions
/// for product-form coefficients (each block collapses to one grid sum,
/// with the sign factor surviving only in odd blocks).
pub fn kform_eval(form: &KForm, eps: &SignVector) -> Result<f64> {
    let n = form.n;
    if eps.len() != n {
        return Err(Error::GridMismatch {
            message: format!("form has n={n}, sign vector has {}", eps.len()),
        });
    }
    if form.k > n {
        log::warn!(
            "k-form of order {} on a grid of {} points: the distinct-index sum is empty",
            form.k,
            n
        );
        return Ok(0.0);
    }
    let signs = eps.signs();
    match &form.body {
        KFormBody::Grid(f) => {
            if form.k == 1 {
                return phi_eval(f, eps);
            }
            let mut idx = vec![1usize; form.k];
            let mut acc = KahanSum::default();
            loop {
                if all_distinct(&idx) {
                    let mut term = f.value(&idx);
                    for &i in &idx {
                        term *= signs[i - 1];
                    }
                    acc.add(term);
                }
                if !advance(&mut idx, n) {
                    break;
                }
            }
            Ok(acc.value() * inv_root_scale(n, form.k))
        }
        KFormBody::Product {
            basis_values,
            terms,
            position_partitions,
        } => {
            let mut total = KahanSum::default();
            for (tuple, c) in terms {
                let mut term_value = 0.0;
                for partition in position_partitions {
                    let mut value = 1.0;
                    for block in partition {
                        // coefficient (-1)^(|B|-1) (|B|-1)! per block
                        let mut weight: f64 = (1..block.len()).map(|t| t as f64).product();
                        if block.len() % 2 == 0 {
                            weight = -weight;
                        }
                        let odd = block.len() % 2 == 1;
                        let mut s = KahanSum::default();
                        for (i, &sign) in signs.iter().enumerate() {
                            let mut p = if odd { sign } else { 1.0 };
                            for &pos in block {
                                p *= basis_values[tuple[pos] - 1].values()[i];
                            }
                            s.add(p);
                        }
                        value *= weight * s.value() * inv_root_scale(n, block.len());
                    }
                    term_value += value;
                }
                total.add(c * term_value);
            }
            Ok(total.value())
        }
    }
}

/// Exact E[A B] over all 2^n sign vectors. Zero for forms of different
/// order; the identity E[A_k A_m] = 0 for k != m is what the brute force
/// is meant to confirm, so nothing here assumes it.
pub fn kform_orthogonality_check(a: &KForm, b: &KForm, caps: &Caps) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::GridMismatch {
            message: format!("forms live on different grids: {} vs {}", a.n, b.n),
        });
    }
    let n = a.n;
    if n > caps.oracle_n.min(40) {
        return Err(Error::Capacity {
            what: "brute-force grid size n",
            requested: n as u128,
            cap: caps.oracle_n.min(40) as u128,
        });
    }
    if a.k > n || b.k > n {
        log::warn!("orthogonality check with an empty distinct-index sum");
        return Ok(0.0);
    }
    let partials = par_chunk_map(1u64 << n, |start, end| {
        let mut acc = KahanSum::default();
        for mask in start..end {
            let eps = SignVector::from_mask(mask, n);
            let left = kform_eval(a, &eps).expect("validated above");
            let right = kform_eval(b, &eps).expect("validated above");
            acc.add(left * right);
        }
        acc.value()
    });
    let mut total = KahanSum::default();
    for p in partials {
        total.add(p);
    }
    Ok(total.value() / (1u64 << n) as f64)
}

/// E[(A_k^n)^2] from its closed quadratic form
/// n^(-k) sum over distinct tuples i of f(i) sum over permutations s of
/// f(i o s) -- exact at any n, no sign enumeration.
pub fn kform_second_moment(form: &KForm) -> Result<f64> {
    let (n, k) = (form.n, form.k);
    if k > n {
        log::warn!("second moment of an empty distinct-index sum");
        return Ok(0.0);
    }
    let tuples = (n as u128).saturating_pow(k as u32);
    let perms: u128 = (2..=k as u128).product();
    let work = tuples.saturating_mul(perms);
    if work > 1 << 34 {
        return Err(Error::Capacity {
            what: "second-moment tuple enumeration",
            requested: work,
            cap: 1 << 34,
        });
    }
    let mut orders: Vec<Vec<usize>> = Vec::new();
    let mut order: Vec<usize> = (0..k).collect();
    loop {
        orders.push(order.clone());
        if !next_permutation(&mut order) {
            break;
        }
    }
    let mut idx = vec![1usize; k];
    let mut permuted = vec![1usize; k];
    let mut acc = KahanSum::default();
    loop {
        if all_distinct(&idx) {
            let value = form.point_value(&idx);
            if value != 0.0 {
                let mut inner = 0.0;
                for sigma in &orders {
                    for (slot, &pos) in permuted.iter_mut().zip(sigma) {
                        *slot = idx[pos];
                    }
                    inner += form.point_value(&permuted);
                }
                acc.add(value * inner);
            }
        }
        if !advance(&mut idx, n) {
            break;
        }
    }
    Ok(acc.value() * inv_root_scale(n, 2 * k))
}

/// Probabilists' Hermite polynomial H_r as a coefficient array (index =
/// power), from H_0 = 1, H_1 = x, H_{r+1} = x H_r - r H_{r-1}.
pub fn hermite_polynomial(r: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if r == 0 {
        return prev;
    }
    let mut current = vec![0.0, 1.0];
    for degree in 1..r {
        let mut next = vec![0.0; degree + 2];
        for (j, &c) in current.iter().enumerate() {
            next[j + 1] += c;
        }
        for (j, &c) in prev.iter().enumerate() {
            next[j] -= degree as f64 * c;
        }
        prev = std::mem::replace(&mut current, next);
    }
    current
}

/// E[prod_i F_i^{p_i}] where F_i is the Hermite functional of the i-th
/// coefficient family: each basis monomial becomes a Wick monomial in the
/// jointly Gaussian variables (psi_m, xi), and the expectation is the
/// Isserlis pairing sum over all matchings that never pair two factors of
/// the same Wick monomial. Covariances are Riemann inner products of the
/// basis at `reference_n`.
pub fn hermite_functional_moment(
    functionals: &[(MultiIndexCoeffs, usize)],
    reference_n: usize,
    caps: &Caps,
) -> Result<f64> {
    if functionals.is_empty() {
        return Err(Error::Invalid("need at least one functional".into()));
    }
    if functionals.iter().any(|(_, p)| *p == 0) {
        return Err(Error::Invalid("functional powers must be positive".into()));
    }
    // Gram matrix over the concatenated bases, one offset per functional.
    let mut offsets = Vec::with_capacity(functionals.len());
    let mut sampled: Vec<GridFunction> = Vec::new();
    for (coeffs, _) in functionals {
        offsets.push(sampled.len());
        for e in &coeffs.basis {
            sampled.push(sample(e, reference_n)?);
        }
    }
    let m_total = sampled.len();
    let mut gram = vec![vec![0.0; m_total]; m_total];
    for a in 0..m_total {
        for b in a..m_total {
            let ip = riemann_inner_product(&sampled[a], &sampled[b])?;
            gram[a][b] = ip;
            gram[b][a] = ip;
        }
    }
    // One copy of the functional per unit of power; each copy is one Wick
    // monomial once a support term is chosen for it.
    let mut copy_functional: Vec<usize> = Vec::new();
    for (i, (_, power)) in functionals.iter().enumerate() {
        copy_functional.extend(std::iter::repeat(i).take(*power));
    }
    let counts: Vec<usize> = copy_functional
        .iter()
        .map(|&i| functionals[i].0.k)
        .collect();
    if counts.iter().sum::<usize>() % 2 == 1 {
        return Ok(0.0);
    }
    let labeling = VertexLabeling::from_counts(&counts).expect("positive arities");
    let mut combos: u128 = 1;
    for &i in &copy_functional {
        combos = combos.saturating_mul(functionals[i].0.coeffs.len() as u128);
    }
    if combos > caps.expansion_cap as u128 {
        return Err(Error::Capacity {
            what: "expanded monomial combinations",
            requested: combos,
            cap: caps.expansion_cap as u128,
        });
    }
    let supports: Vec<Vec<(&Vec<usize>, f64)>> = copy_functional
        .iter()
        .map(|&i| functionals[i].0.coeffs().collect())
        .collect();
    let mut cursor = vec![0usize; supports.len()];
    let mut total = KahanSum::default();
    loop {
        // flat basis index of every vertex for the chosen monomials
        let mut vertex_basis: Vec<usize> = Vec::new();
        let mut coefficient = 1.0;
        for (copy, &t) in cursor.iter().enumerate() {
            let (tuple, c) = supports[copy][t];
            coefficient *= c;
            let offset = offsets[copy_functional[copy]];
            vertex_basis.extend(tuple.iter().map(|&m| offset + m - 1));
        }
        if coefficient != 0.0 {
            let mut pairing_sum = KahanSum::default();
            for matching in enumerate_pair_partitions(&labeling, true, caps)? {
                let mut product = 1.0;
                for pair in &matching.blocks {
                    product *= gram[vertex_basis[pair[0] - 1]][vertex_basis[pair[1] - 1]];
                }
                pairing_sum.add(product);
            }
            total.add(coefficient * pairing_sum.value());
        }
        // next support combination, last copy fastest
        let mut pos = cursor.len();
        loop {
            if pos == 0 {
                return Ok(total.value());
            }
            pos -= 1;
            cursor[pos] += 1;
            if cursor[pos] < supports[pos].len() {
                break;
            }
            cursor[pos] = 0;
        }
    }
}

/// Moments of one k-form at one grid size, next to their chaos-limit
/// targets. `std_errors[i] == 0.0` marks an exactly computed entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimitRow {
    pub n: usize,
    /// E[A], E[A^2], E[A^3] at this n.
    pub moments: [f64; 3],
    pub std_errors: [f64; 3],
    /// The same three moments of the limiting Hermite functional.
    pub targets: [f64; 3],
    pub gaps: [f64; 3],
}

/// Track E[A_k^n], E[(A_k^n)^2], E[(A_k^n)^3] toward the Hermite
/// functional's moments. Small grids are averaged exactly over all 2^n
/// sign vectors; larger ones use seeded Monte Carlo for the odd moments
/// while the second moment keeps its exact quadratic form.
pub fn kform_limit_check(
    coeffs: &MultiIndexCoeffs,
    n_values: &[usize],
    mc: &McConfig,
    reference_n: usize,
    caps: &Caps,
) -> Result<Vec<LimitRow>> {
    if n_values.is_empty() {
        return Err(Error::Invalid("need at least one grid size".into()));
    }
    if !n_values.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Invalid("grid sizes must be strictly ascending".into()));
    }
    let mut targets = [0.0; 3];
    for (power, slot) in targets.iter_mut().enumerate() {
        *slot = hermite_functional_moment(
            &[(coeffs.clone(), power + 1)],
            reference_n,
            caps,
        )?;
    }
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let form = KForm::from_coeffs(coeffs, n)?;
        let (moments, std_errors) = if n <= caps.oracle_n.min(40) {
            (exact_form_moments(&form, n), [0.0; 3])
        } else {
            sampled_form_moments(&form, n, mc)?
        };
        let gaps = [
            (moments[0] - targets[0]).abs(),
            (moments[1] - targets[1]).abs(),
            (moments[2] - targets[2]).abs(),
        ];
        rows.push(LimitRow {
            n,
            moments,
            std_errors,
            targets,
            gaps,
        });
    }
    Ok(rows)
}

/// First three moments by full sign enumeration.
fn exact_form_moments(form: &KForm, n: usize) -> [f64; 3] {
    let partials = par_chunk_map(1u64 << n, |start, end| {
        let mut sums = [KahanSum::default(); 3];
        for mask in start..end {
            let eps = SignVector::from_mask(mask, n);
            let a = kform_eval(form, &eps).expect("matching n by construction");
            sums[0].add(a);
            sums[1].add(a * a);
            sums[2].add(a * a * a);
        }
        [sums[0].value(), sums[1].value(), sums[2].value()]
    });
    let mut totals = [KahanSum::default(); 3];
    for part in partials {
        for (t, p) in totals.iter_mut().zip(part) {
            t.add(p);
        }
    }
    let count = (1u64 << n) as f64;
    [
        totals[0].value() / count,
        totals[1].value() / count,
        totals[2].value() / count,
    ]
}

/// First and third moments by seeded sampling, second moment exact.
fn sampled_form_moments(
    form: &KForm,
    n: usize,
    mc: &McConfig,
) -> Result<([f64; 3], [f64; 3])> {
    let second = kform_second_moment(form)?;
    let partials = par_chunk_map(mc.samples, |start, end| {
        let mut sums = [KahanSum::default(); 4]; // a, a^3, a^2, a^6
        for s in start..end {
            let eps = draw_signs(mc.seed, s, n);
            let a = kform_eval(form, &eps).expect("matching n by construction");
            let a3 = a * a * a;
            sums[0].add(a);
            sums[1].add(a3);
            sums[2].add(a * a);
            sums[3].add(a3 * a3);
        }
        [sums[0].value(), sums[1].value(), sums[2].value(), sums[3].value()]
    });
    let mut totals = [KahanSum::default(); 4];
    for part in partials {
        for (t, p) in totals.iter_mut().zip(part) {
            t.add(p);
        }
    }
    let count = mc.samples as f64;
    let mean1 = totals[0].value() / count;
    let mean3 = totals[1].value() / count;
    let se = |mean: f64, sq_sum: f64| {
        if mc.samples < 2 {
            return 0.0;
        }
        let variance = ((sq_sum - count * mean * mean) / (count - 1.0)).max(0.0);
        (variance / count).sqrt()
    };
    Ok((
        [mean1, second, mean3],
        [se(mean1, totals[2].value()), 0.0, se(mean3, totals[3].value())],
    ))
}

/// Kolmogorov-Smirnov distance between seeded samples of phi(f) and the
/// centered normal law with variance <f,f>: the scalar central limit
/// check for the noise field.
pub fn clt_ks_check(f: &GridFunction, cfg: &McConfig) -> Result<f64> {
    let variance = riemann_inner_product(f, f)?;
    if variance <= 0.0 {
        return Err(Error::Invalid(
            "the null function has no normal limit to compare against".into(),
        ));
    }
    let sigma = variance.sqrt();
    let n = f.n();
    let mut values: Vec<f64> = par_chunk_map(cfg.samples, |start, end| {
        (start..end)
            .map(|s| phi_eval(f, &draw_signs(cfg.seed, s, n)).expect("matching n"))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    values.sort_unstable_by(f64::total_cmp);
    Ok(ks_distance(&values, |x| normal_cdf(x / sigma)))
}

/// Largest gap between the empirical characteristic function of the pair
/// (phi(f), phi(g)) and the centered bivariate Gaussian CF with the
/// Riemann covariance of f and g: the joint central limit check.
pub fn joint_cf_distance(f: &GridFunction, g: &GridFunction, cfg: &McConfig) -> Result<f64> {
    if f.n() != g.n() {
        return Err(Error::GridMismatch {
            message: format!("grids differ: {} vs {}", f.n(), g.n()),
        });
    }
    let cov_ff = riemann_inner_product(f, f)?;
    let cov_fg = riemann_inner_product(f, g)?;
    let cov_gg = riemann_inner_product(g, g)?;
    let n = f.n();
    let pairs: Vec<(f64, f64)> = par_chunk_map(cfg.samples, |start, end| {
        (start..end)
            .map(|s| {
                let eps = draw_signs(cfg.seed, s, n);
                (
                    phi_eval(f, &eps).expect("matching n"),
                    phi_eval(g, &eps).expect("matching n"),
                )
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(cf_distance_2d(&xs, &ys, |s, t| {
        let quad = s * s * cov_ff + 2.0 * s * t * cov_fg + t * t * cov_gg;
        ((-0.5 * quad).exp(), 0.0)
    }))
}
