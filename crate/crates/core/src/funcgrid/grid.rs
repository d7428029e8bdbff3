use crate::accum::{inv_root_scale, KahanSum};
use crate::error::{Error, Result};

use super::Expr;

/// Hard ceiling on stored grid values (n^arity); keeps accidental
/// `n=1000, arity=3` requests from exhausting memory.
pub const MAX_GRID_LEN: usize = 1 << 24;

/// A function on [0,1]^k represented by its values on the uniform grid
/// {i/n : i = 1..n} per axis, stored row-major (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    n: usize,
    arity: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(n: usize, arity: usize, values: Vec<f64>) -> Result<Self> {
        let expected = grid_len(n, arity)?;
        if values.len() != expected {
            return Err(Error::GridMismatch {
                message: format!(
                    "expected {expected} values for n={n}, arity={arity}, got {}",
                    values.len()
                ),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                value: values[pos],
                index: unflatten(pos, n, arity),
            });
        }
        Ok(GridFunction { n, arity, values })
    }

    /// Constant function on the arity-1 grid.
    pub fn constant(n: usize, value: f64) -> Result<Self> {
        GridFunction::new(n, 1, vec![value; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at the 1-based multi-index (i_1..i_k).
    pub fn value(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.arity, "index arity mismatch");
        let mut offset = 0;
        for &i in index {
            assert!(1 <= i && i <= self.n, "index {i} outside 1..={}", self.n);
            offset = offset * self.n + (i - 1);
        }
        self.values[offset]
    }

    /// Arity-1 value at 1-based grid index i, i.e. f(i/n).
    pub fn value_at(&self, i: usize) -> f64 {
        debug_assert_eq!(self.arity, 1);
        self.values[i - 1]
    }

    /// Pointwise linear combination a*f + b*g of two equal-shape grids.
    pub fn linear_combination(a: f64, f: &Self, b: f64, g: &Self) -> Result<Self> {
        if f.n != g.n || f.arity != g.arity {
            return Err(Error::GridMismatch {
                message: format!(
                    "cannot combine (n={}, arity={}) with (n={}, arity={})",
                    f.n, f.arity, g.n, g.arity
                ),
            });
        }
        let values = f
            .values
            .iter()
            .zip(&g.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        GridFunction::new(f.n, f.arity, values)
    }

    /// Parse the CSV grid format:
    ///
    /// ```text
    /// n,arity
    /// 4,1
    /// 0.0625
    /// 0.25
    /// 0.5625
    /// 1
    /// ```
    ///
    /// Line 1 is the literal header, line 2 holds the two integers, then
    /// one value per line in row-major order.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        match lines.next() {
            Some("n,arity") => {}
            Some(other) => {
                return Err(Error::Csv(format!(
                    "expected header `n,arity`, found `{other}`"
                )))
            }
            None => return Err(Error::Csv("empty input".into())),
        }
        let dims = lines
            .next()
            .ok_or_else(|| Error::Csv("missing `n,arity` values".into()))?;
        let (n_text, arity_text) = dims
            .split_once(',')
            .ok_or_else(|| Error::Csv(format!("expected `n,arity` integers, found `{dims}`")))?;
        let n: usize = n_text
            .trim()
            .parse()
            .map_err(|_| Error::Csv(format!("bad grid size `{n_text}`")))?;
        let arity: usize = arity_text
            .trim()
            .parse()
            .map_err(|_| Error::Csv(format!("bad arity `{arity_text}`")))?;
        let expected = grid_len(n, arity)?;
        let mut values = Vec::with_capacity(expected);
        for line in lines {
            let v: f64 = line
                .parse()
                .map_err(|_| Error::Csv(format!("bad value `{line}`")))?;
            values.push(v);
        }
        if values.len() != expected {
            return Err(Error::Csv(format!(
                "expected {expected} values, found {}",
                values.len()
            )));
        }
        GridFunction::new(n, arity, values)
    }

    /// Inverse of [`GridFunction::from_csv`]; values print in shortest
    /// round-trip form, so save/load is bit-exact.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,arity\n");
        out.push_str(&format!("{},{}\n", self.n, self.arity));
        for v in &self.values {
            out.push_str(&format!("{v}\n"));
        }
        out
    }
}

fn grid_len(n: usize, arity: usize) -> Result<usize> {
    if n == 0 || arity == 0 {
        return Err(Error::Invalid("grid size and arity must be positive".into()));
    }
    let len = n
        .checked_pow(u32::try_from(arity).unwrap_or(u32::MAX))
        .unwrap_or(usize::MAX);
    if len > MAX_GRID_LEN {
        return Err(Error::Capacity {
            what: "grid length n^arity",
            requested: len as u128,
            cap: MAX_GRID_LEN as u128,
        });
    }
    Ok(len)
}

fn unflatten(mut offset: usize, n: usize, arity: usize) -> Vec<usize> {
    let mut index = vec![0; arity];
    for slot in index.iter_mut().rev() {
        *slot = offset % n + 1;
        offset /= n;
    }
    index
}

/// Evaluate an expression on the grid {i/n}^arity, row-major.
pub fn sample(expr: &Expr, n: usize) -> Result<GridFunction> {
    let arity = expr.arity();
    let len = grid_len(n, arity)?;
    let mut values = Vec::with_capacity(len);
    let mut point = vec![0.0; arity];
    let mut index = vec![1usize; arity];
    for flat in 0..len {
        for (slot, &i) in point.iter_mut().zip(index.iter()) {
            *slot = i as f64 / n as f64;
        }
        let v = expr.eval(&point);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                value: v,
                index: index.clone(),
            });
        }
        values.push(v);
        // advance the 1-based odometer, last axis fastest
        if flat + 1 < len {
            for slot in index.iter_mut().rev() {
                if *slot == n {
                    *slot = 1;
                } else {
                    *slot += 1;
                    break;
                }
            }
        }
    }
    GridFunction::new(n, arity, values)
}

/// The block factor of the moment and diagram formulas:
/// sum_k prod_d f_d(k/n) * n^(-L/2) over the shared arity-1 grid.
pub fn weighted_grid_sum(factors: &[&GridFunction]) -> Result<f64> {
    let n = check_univariate_family(factors)?;
    let mut acc = KahanSum::default();
    for k in 0..n {
        let mut prod = 1.0;
        for f in factors {
            prod *= f.values[k];
        }
        acc.add(prod);
    }
    Ok(acc.value() * inv_root_scale(n, factors.len()))
}

/// Discrete inner product sum_k f(k/n) g(k/n) / n, the Riemann proxy for
/// the L^2([0,1]) pairing that the Gaussian limit consumes.
pub fn riemann_inner_product(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    let n = check_univariate_family(&[f, g])?;
    let mut acc = KahanSum::default();
    for k in 0..n {
        acc.add(f.values[k] * g.values[k]);
    }
    Ok(acc.value() / n as f64)
}

fn check_univariate_family(factors: &[&GridFunction]) -> Result<usize> {
    let first = factors
        .first()
        .ok_or_else(|| Error::Invalid("factor list must be nonempty".into()))?;
    for f in factors {
        if f.arity != 1 {
            return Err(Error::GridMismatch {
                message: format!("expected arity 1, got {}", f.arity),
            });
        }
        if f.n != first.n {
            return Err(Error::GridMismatch {
                message: format!("grid sizes differ: {} vs {}", first.n, f.n),
            });
        }
    }
    Ok(first.n)
}
