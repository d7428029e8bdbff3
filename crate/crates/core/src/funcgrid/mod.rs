//! Grid-sampled functions on [0,1]^k and the expression language that
//! defines them.
//!
//! Grid convention: axis values are i/n for i = 1..n; the point 0 is not
//! part of the grid. All downstream sums (noise evaluation, block sums,
//! Riemann inner products) rely on this.

mod expr;
mod grid;

pub use expr::{parse_expr, Expr};
pub use grid::{riemann_inner_product, sample, weighted_grid_sum, GridFunction};
