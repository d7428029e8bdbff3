//! Expectations of Wick-power products E[:phi^{n1}(f1): ... :phi^{nj}(fj):]
//! by diagram summation, and their Gaussian limit.
//!
//! A diagram is an even-block partition of the K = sum n_i vertices
//! (blocks inside a single factor are excluded) with one traversal chosen
//! per block. Its value is prod over blocks of (-1)^(m-1) times the
//! block's weighted grid sum with normalization n^(-|s|/2). Summing the
//! traversal signs per block collapses to the block coefficients, which is
//! the closed engine; replacing blocks by pairs and grid sums by Riemann
//! inner products gives the Gaussian pairing sum the whole family
//! approaches as the grid refines, at rate 1/n for smooth functions.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::accum::{inv_root_scale, par_sum, KahanSum};
use crate::error::{Error, Result};
use crate::funcgrid::{riemann_inner_product, sample, weighted_grid_sum, Expr, GridFunction};
use crate::moments::{even_partition_sum, MomentSpec};
use crate::partitions::{
    enumerate_even_partitions, enumerate_pair_partitions, enumerate_traversals, Diagram,
    Traversal, VertexLabeling,
};
use crate::wick::wick_power_of_noise;
use crate::Caps;

/// The Wick product Pi_i :phi^{n_i}(f_i): whose expectation is wanted.
/// Shapes and invariants match [`MomentSpec`]; the interpretation of the
/// powers differs (Wick powers, not plain powers).
#[derive(Clone, Debug, PartialEq)]
pub struct WickMomentSpec {
    inner: MomentSpec,
}

impl WickMomentSpec {
    pub fn new(factors: Vec<(GridFunction, usize)>) -> Result<Self> {
        Ok(WickMomentSpec {
            inner: MomentSpec::new(factors)?,
        })
    }

    pub fn factors(&self) -> &[(GridFunction, usize)] {
        self.inner.factors()
    }

    pub fn n(&self) -> usize {
        self.inner.n()
    }

    pub fn total_degree(&self) -> usize {
        self.inner.total_degree()
    }

    pub fn labeling(&self) -> VertexLabeling {
        self.inner.labeling()
    }

    fn vertex_function(&self) -> Vec<&GridFunction> {
        self.factors()
            .iter()
            .flat_map(|(f, q)| std::iter::repeat(f).take(*q))
            .collect()
    }
}

/// One diagram with its numeric value I(G) and the per-block grid sums
/// (unsigned) that value was assembled from.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagramTerm {
    pub diagram: Diagram,
    pub block_values: Vec<f64>,
    pub value: f64,
}

impl Serialize for DiagramTerm {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct TraversalRecord<'a> {
            order: &'a [usize],
            ascents: usize,
            sign: i64,
        }
        let traversals: Vec<TraversalRecord> = self
            .diagram
            .traversals
            .iter()
            .map(|t| TraversalRecord {
                order: &t.order,
                ascents: t.ascents,
                sign: t.sign(),
            })
            .collect();
        let mut record = serializer.serialize_struct("DiagramTerm", 4)?;
        record.serialize_field("blocks", &self.diagram.partition.blocks)?;
        record.serialize_field("traversals", &traversals)?;
        record.serialize_field("block_values", &self.block_values)?;
        record.serialize_field("value", &self.value)?;
        record.end()
    }
}

/// E[Wick product] as the full diagram sum: every admissible partition,
/// every traversal combination, one term per diagram. Returns the total
/// and the terms in canonical order (partitions in enumeration order, the
/// last block's traversal advancing fastest).
pub fn wick_moment_traversal(
    spec: &WickMomentSpec,
    caps: &Caps,
) -> Result<(f64, Vec<DiagramTerm>)> {
    if spec.total_degree() % 2 == 1 {
        return Ok((0.0, Vec::new()));
    }
    let vertex_function = spec.vertex_function();
    let mut terms: Vec<DiagramTerm> = Vec::new();
    let mut combos_seen: u128 = 0;
    for partition in enumerate_even_partitions(&spec.labeling(), true, caps)? {
        let combos: u128 = partition
            .blocks
            .iter()
            .map(|b| factorial(b.len() - 1))
            .product();
        combos_seen += combos;
        if combos_seen > caps.traversal_budget as u128 {
            return Err(Error::Capacity {
                what: "traversal combinations",
                requested: combos_seen,
                cap: caps.traversal_budget as u128,
            });
        }
        let block_values = partition
            .blocks
            .iter()
            .map(|block| {
                let functions: Vec<&GridFunction> =
                    block.iter().map(|&v| vertex_function[v - 1]).collect();
                weighted_grid_sum(&functions)
            })
            .collect::<Result<Vec<f64>>>()?;
        let base: f64 = block_values.iter().product();
        let traversal_lists: Vec<Vec<Traversal>> = partition
            .blocks
            .iter()
            .map(|b| enumerate_traversals(b).collect())
            .collect();
        let mut cursor = vec![0usize; traversal_lists.len()];
        loop {
            let chosen: Vec<Traversal> = cursor
                .iter()
                .zip(&traversal_lists)
                .map(|(&i, list)| list[i].clone())
                .collect();
            let sign: i64 = chosen.iter().map(Traversal::sign).product();
            terms.push(DiagramTerm {
                diagram: Diagram {
                    partition: partition.clone(),
                    traversals: chosen,
                },
                block_values: block_values.clone(),
                value: sign as f64 * base,
            });
            // advance the odometer, last block fastest
            let mut pos = cursor.len();
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                cursor[pos] += 1;
                if cursor[pos] < traversal_lists[pos].len() {
                    break;
                }
                cursor[pos] = 0;
            }
            if pos == 0 && cursor[0] == 0 {
                break;
            }
        }
    }
    let mut acc = KahanSum::default();
    for term in &terms {
        acc.add(term.value);
    }
    Ok((acc.value(), terms))
}

/// E[Wick product] with the traversal sums already collapsed into the
/// per-size block coefficients; no diagram enumeration beyond partitions.
pub fn wick_moment_closed(spec: &WickMomentSpec, caps: &Caps) -> Result<f64> {
    if spec.total_degree() % 2 == 1 {
        return Ok(0.0);
    }
    even_partition_sum(&spec.vertex_function(), &spec.labeling(), true, caps)
}

/// Pathwise oracle: average Pi_i P_{n_i}(phi(f_i)) over all 2^n sign
/// vectors, with each P built by [`wick_power_of_noise`].
pub fn wick_moment_oracle(spec: &WickMomentSpec, caps: &Caps) -> Result<f64> {
    let n = spec.n();
    let cap = caps.oracle_n.min(40);
    if n > cap {
        return Err(Error::Capacity {
            what: "brute-force grid size n",
            requested: n as u128,
            cap: cap as u128,
        });
    }
    let prepared = spec
        .factors()
        .iter()
        .map(|(f, m)| Ok((f.values(), wick_power_of_noise(f, *m, caps)?)))
        .collect::<Result<Vec<_>>>()?;
    let scale = inv_root_scale(n, 1);
    let total = par_sum(1u64 << n, |mask| {
        let mut prod = 1.0;
        for (values, poly) in &prepared {
            let mut s = 0.0;
            for (k, v) in values.iter().enumerate() {
                s += if mask >> k & 1 == 1 { *v } else { -*v };
            }
            prod *= poly.eval(s * scale);
        }
        prod
    });
    Ok(total / (1u64 << n) as f64)
}

/// The Gaussian-side value the Bernoulli diagram sum converges to: only
/// pair blocks survive, each contributing the Riemann inner product of its
/// two factors on the same grid.
pub fn gaussian_wick_moment(spec: &WickMomentSpec, caps: &Caps) -> Result<f64> {
    if spec.total_degree() % 2 == 1 {
        return Ok(0.0);
    }
    let factors = spec.factors();
    let j = factors.len();
    let mut gram = vec![vec![0.0; j]; j];
    for a in 0..j {
        for b in a..j {
            let ip = riemann_inner_product(&factors[a].0, &factors[b].0)?;
            gram[a][b] = ip;
            gram[b][a] = ip;
        }
    }
    let labeling = spec.labeling();
    let mut acc = KahanSum::default();
    for matching in enumerate_pair_partitions(&labeling, true, caps)? {
        let mut term = 1.0;
        for pair in &matching.blocks {
            let a = labeling.multiplier_of(pair[0]) - 1;
            let b = labeling.multiplier_of(pair[1]) - 1;
            term *= gram[a][b];
        }
        acc.add(term);
    }
    Ok(acc.value())
}

/// One grid size of a [`convergence_study`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub bernoulli: f64,
    pub gaussian: f64,
    pub abs_error: f64,
}

impl ConvergenceRow {
    /// abs_error scaled by n; roughly constant when the error is O(1/n).
    pub fn error_times_n(&self) -> f64 {
        self.abs_error * self.n as f64
    }
}

/// Evaluate the Bernoulli diagram sum and its Gaussian limit for the same
/// Wick product across grid sizes. The n-dependence of `abs_error` shows
/// the rate at which the non-pair diagrams die off.
pub fn convergence_study(
    template: &[(Expr, usize)],
    n_values: &[usize],
    caps: &Caps,
) -> Result<Vec<ConvergenceRow>> {
    if n_values.is_empty() {
        return Err(Error::Invalid("need at least one grid size".into()));
    }
    if !n_values.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Invalid("grid sizes must be strictly ascending".into()));
    }
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let factors = template
            .iter()
            .map(|(expr, power)| Ok((sample(expr, n)?, *power)))
            .collect::<Result<Vec<_>>>()?;
        let spec = WickMomentSpec::new(factors)?;
        let bernoulli = wick_moment_closed(&spec, caps)?;
        let gaussian = gaussian_wick_moment(&spec, caps)?;
        rows.push(ConvergenceRow {
            n,
            bernoulli,
            gaussian,
            abs_error: (bernoulli - gaussian).abs(),
        });
    }
    Ok(rows)
}

fn factorial(k: usize) -> u128 {
    (2..=k as u128).product()
}
