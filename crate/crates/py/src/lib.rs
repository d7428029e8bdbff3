//! Python module `wicklab_py`: grid functions, moment engines, Wick
//! polynomials, diagram sums, and chaos-limit studies.
//!
//! Scalar results come back as floats, exact rationals as
//! (numerator, denominator) integer pairs, and row-shaped results
//! (diagram terms, convergence tables, limit rows) as plain dicts, so the
//! module needs nothing beyond the standard library on the Python side.

use num_bigint::BigInt;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};
use serde_json::Value as JsonValue;

use wicklab::funcgrid;
use wicklab::hermite;
use wicklab::moments;
use wicklab::numbers;
use wicklab::wick;
use wicklab::{diagrams, Caps};

/// Capacity violations become RuntimeError, everything else ValueError.
fn to_py_err(e: wicklab::Error) -> PyErr {
    if e.is_capacity_error() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn rational_parts(r: &numbers::Rational) -> (BigInt, BigInt) {
    (r.numer().clone(), r.denom().clone())
}

fn json_to_py(py: Python<'_>, value: &JsonValue) -> PyResult<Py<PyAny>> {
    Ok(match value {
        JsonValue::Null => py.None(),
        JsonValue::Bool(b) => PyBool::new(py, *b).to_owned().into_any().unbind(),
        JsonValue::Number(number) => {
            if let Some(i) = number.as_i64() {
                i.into_pyobject(py)?.into_any().unbind()
            } else if let Some(u) = number.as_u64() {
                u.into_pyobject(py)?.into_any().unbind()
            } else {
                number
                    .as_f64()
                    .expect("json number")
                    .into_pyobject(py)?
                    .into_any()
                    .unbind()
            }
        }
        JsonValue::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        JsonValue::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        JsonValue::Object(map) => {
            let dict = PyDict::new(py);
            for (key, item) in map {
                dict.set_item(key, json_to_py(py, item)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn rows_to_py<T: serde::Serialize>(py: Python<'_>, rows: &T) -> PyResult<Py<PyAny>> {
    let value = serde_json::to_value(rows).expect("serializable rows");
    json_to_py(py, &value)
}

/// A function sampled on the grid {1/n, ..., n/n} (tensor powers of it
/// for arity > 1), stored row-major.
#[pyclass(frozen)]
struct GridFunction {
    inner: funcgrid::GridFunction,
}

#[pymethods]
impl GridFunction {
    #[new]
    fn new(n: usize, arity: usize, values: Vec<f64>) -> PyResult<Self> {
        Ok(GridFunction {
            inner: funcgrid::GridFunction::new(n, arity, values).map_err(to_py_err)?,
        })
    }

    /// Sample an expression in x (or x1..xk for arity k) at grid size n.
    #[staticmethod]
    #[pyo3(signature = (source, n, arity = 1))]
    fn sample(source: &str, n: usize, arity: usize) -> PyResult<Self> {
        let expr = funcgrid::parse_expr(source, arity).map_err(to_py_err)?;
        Ok(GridFunction {
            inner: funcgrid::sample(&expr, n).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(GridFunction {
            inner: funcgrid::GridFunction::from_csv(text).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn arity(&self) -> usize {
        self.inner.arity()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    /// Value at a 1-based index tuple.
    fn value(&self, index: Vec<usize>) -> PyResult<f64> {
        if index.len() != self.inner.arity()
            || index.iter().any(|&i| i == 0 || i > self.inner.n())
        {
            return Err(PyValueError::new_err(format!(
                "index {:?} outside the 1..={} grid of arity {}",
                index,
                self.inner.n(),
                self.inner.arity()
            )));
        }
        Ok(self.inner.value(&index))
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __repr__(&self) -> String {
        format!(
            "GridFunction(n={}, arity={})",
            self.inner.n(),
            self.inner.arity()
        )
    }
}

/// Monic orthogonal polynomial for a moment sequence.
#[pyclass(frozen)]
struct WickPolynomial {
    inner: wick::WickPolynomial,
}

#[pymethods]
impl WickPolynomial {
    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree
    }

    /// Coefficient of x^i at index i.
    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs.clone()
    }

    #[getter]
    fn base_moments(&self) -> Vec<f64> {
        self.inner.base_moments.clone()
    }

    fn eval(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    fn __repr__(&self) -> String {
        format!("WickPolynomial(degree={}, coeffs={:?})", self.inner.degree, self.inner.coeffs)
    }
}

fn collect_factors(
    py: Python<'_>,
    factors: Vec<(Py<GridFunction>, usize)>,
) -> Vec<(funcgrid::GridFunction, usize)> {
    factors
        .into_iter()
        .map(|(f, p)| (f.borrow(py).inner.clone(), p))
        .collect()
}

fn moment_spec(
    py: Python<'_>,
    factors: Vec<(Py<GridFunction>, usize)>,
) -> PyResult<moments::MomentSpec> {
    moments::MomentSpec::new(collect_factors(py, factors)).map_err(to_py_err)
}

fn wick_spec(
    py: Python<'_>,
    factors: Vec<(Py<GridFunction>, usize)>,
) -> PyResult<diagrams::WickMomentSpec> {
    diagrams::WickMomentSpec::new(collect_factors(py, factors)).map_err(to_py_err)
}

fn signs(values: Vec<f64>) -> PyResult<moments::SignVector> {
    moments::SignVector::new(values).map_err(to_py_err)
}

// ---- exact combinatorics ----

/// Bernoulli number B_m as (numerator, denominator), B_1 = -1/2.
#[pyfunction]
fn bernoulli_number(m: u32) -> (BigInt, BigInt) {
    rational_parts(&numbers::bernoulli_number(m))
}

#[pyfunction]
fn eulerian_number(n: u32, l: u32) -> BigInt {
    numbers::eulerian_number(n, l)
}

/// Coefficient attached to a diagram block of the given even size.
#[pyfunction]
fn block_coefficient(size: usize) -> PyResult<(BigInt, BigInt)> {
    Ok(rational_parts(
        &numbers::block_coefficient(size).map_err(to_py_err)?,
    ))
}

#[pyfunction]
fn alternating_eulerian_sum(size: usize) -> PyResult<(BigInt, BigInt)> {
    Ok(rational_parts(
        &numbers::alternating_eulerian_sum(size).map_err(to_py_err)?,
    ))
}

// ---- noise field and plain moments ----

/// The pm-1 sign vector of a seeded sample stream, as floats.
#[pyfunction]
fn draw_signs(seed: u64, sample_index: u64, n: usize) -> Vec<f64> {
    moments::draw_signs(seed, sample_index, n).signs().to_vec()
}

/// phi(f) = sum f(k/n) eps_k / sqrt(n) for an explicit sign vector.
#[pyfunction]
fn phi_eval(py: Python<'_>, f: Py<GridFunction>, eps: Vec<f64>) -> PyResult<f64> {
    moments::phi_eval(&f.borrow(py).inner, &signs(eps)?).map_err(to_py_err)
}

/// E[prod phi^{p_i}(f_i)] by the even-partition formula.
#[pyfunction]
fn moment_formula(py: Python<'_>, factors: Vec<(Py<GridFunction>, usize)>) -> PyResult<f64> {
    moments::moment_partition_formula(&moment_spec(py, factors)?, &Caps::default())
        .map_err(to_py_err)
}

/// The same moment by full 2^n enumeration.
#[pyfunction]
fn moment_bruteforce(py: Python<'_>, factors: Vec<(Py<GridFunction>, usize)>) -> PyResult<f64> {
    moments::moment_bruteforce(&moment_spec(py, factors)?, &Caps::default()).map_err(to_py_err)
}

/// The same moment by seeded sampling: (estimate, standard_error).
#[pyfunction]
fn moment_montecarlo(
    py: Python<'_>,
    factors: Vec<(Py<GridFunction>, usize)>,
    samples: u64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let cfg = moments::McConfig::new(samples, seed).map_err(to_py_err)?;
    Ok(moments::moment_montecarlo(&moment_spec(py, factors)?, &cfg))
}

// ---- Wick powers and the stochastic exponent ----

/// Moments of a single pm-1 sign: 1, 0, 1, 0, ...
#[pyfunction]
fn symmetric_sign_moments(degree: usize) -> Vec<f64> {
    wick::symmetric_sign_moments(degree)
}

/// Monic Wick polynomial for an explicit moment sequence mu_0..mu_m.
#[pyfunction]
fn wick_polynomial(moments: Vec<f64>) -> PyResult<WickPolynomial> {
    Ok(WickPolynomial {
        inner: wick::wick_polynomial(&moments).map_err(to_py_err)?,
    })
}

/// Wick power :phi^m(f): as a polynomial in phi(f), with exact moments.
#[pyfunction]
fn wick_power_of_noise(py: Python<'_>, f: Py<GridFunction>, m: usize) -> PyResult<WickPolynomial> {
    Ok(WickPolynomial {
        inner: wick::wick_power_of_noise(&f.borrow(py).inner, m, &Caps::default())
            .map_err(to_py_err)?,
    })
}

/// Partial sum of the stochastic exponent sum alpha^k P_k(x) / k!.
#[pyfunction]
fn stochastic_exponent_partial(
    alpha: f64,
    moments: Vec<f64>,
    x: f64,
    terms: usize,
) -> PyResult<f64> {
    wick::stochastic_exponent_partial(alpha, &moments, x, terms).map_err(to_py_err)
}

/// Closed form exp(alpha phi) / prod_k cosh(alpha f(k/n) / sqrt(n)).
#[pyfunction]
fn stochastic_exponent_closed(
    py: Python<'_>,
    alpha: f64,
    f: Py<GridFunction>,
    eps: Vec<f64>,
) -> PyResult<f64> {
    wick::stochastic_exponent_closed(alpha, &f.borrow(py).inner, &signs(eps)?).map_err(to_py_err)
}

// ---- diagram sums for Wick products ----

/// Full diagram expansion of E[prod :phi^{p_i}(f_i):]: the total plus one
/// dict per diagram (blocks, traversals, block values, value).
#[pyfunction]
fn wick_moment_traversal(
    py: Python<'_>,
    factors: Vec<(Py<GridFunction>, usize)>,
) -> PyResult<(f64, Py<PyAny>)> {
    let (total, terms) =
        diagrams::wick_moment_traversal(&wick_spec(py, factors)?, &Caps::default())
            .map_err(to_py_err)?;
    Ok((total, rows_to_py(py, &terms)?))
}

/// The same moment with each block collapsed to coefficient times sum.
#[pyfunction]
fn wick_moment_closed(py: Python<'_>, factors: Vec<(Py<GridFunction>, usize)>) -> PyResult<f64> {
    diagrams::wick_moment_closed(&wick_spec(py, factors)?, &Caps::default()).map_err(to_py_err)
}

/// The same moment by full 2^n enumeration of Wick-polynomial products.
#[pyfunction]
fn wick_moment_oracle(py: Python<'_>, factors: Vec<(Py<GridFunction>, usize)>) -> PyResult<f64> {
    diagrams::wick_moment_oracle(&wick_spec(py, factors)?, &Caps::default()).map_err(to_py_err)
}

/// The Gaussian analogue: pair partitions with Riemann inner products.
#[pyfunction]
fn gaussian_wick_moment(py: Python<'_>, factors: Vec<(Py<GridFunction>, usize)>) -> PyResult<f64> {
    diagrams::gaussian_wick_moment(&wick_spec(py, factors)?, &Caps::default()).map_err(to_py_err)
}

/// Bernoulli-vs-Gaussian table for expression factors over grid sizes:
/// dicts with n, bernoulli, gaussian, abs_error (error_times_n derivable).
#[pyfunction]
fn convergence_study(
    py: Python<'_>,
    factors: Vec<(String, usize)>,
    sizes: Vec<usize>,
) -> PyResult<Py<PyAny>> {
    let parsed = factors
        .iter()
        .map(|(source, power)| Ok((funcgrid::parse_expr(source, 1)?, *power)))
        .collect::<wicklab::Result<Vec<_>>>()
        .map_err(to_py_err)?;
    let rows =
        diagrams::convergence_study(&parsed, &sizes, &Caps::default()).map_err(to_py_err)?;
    rows_to_py(py, &rows)
}

// ---- multilinear forms and chaos limits ----

/// Probabilists' Hermite polynomial H_r as coefficients (index = power).
#[pyfunction]
fn hermite_polynomial(r: usize) -> Vec<f64> {
    hermite::hermite_polynomial(r)
}

/// Moments of the multilinear form of a cosine-basis coefficient family
/// against its Hermite-functional targets, one dict per grid size.
#[pyfunction]
#[pyo3(signature = (basis_size, terms, sizes, samples = 2000, seed = 1, reference_n = 4096))]
fn kform_limit_check(
    py: Python<'_>,
    basis_size: usize,
    terms: Vec<(Vec<usize>, f64)>,
    sizes: Vec<usize>,
    samples: u64,
    seed: u64,
    reference_n: usize,
) -> PyResult<Py<PyAny>> {
    let basis = (1..=basis_size)
        .map(hermite::cosine_basis)
        .collect::<wicklab::Result<Vec<_>>>()
        .map_err(to_py_err)?;
    let coeffs = hermite::MultiIndexCoeffs::new(basis, terms).map_err(to_py_err)?;
    let cfg = moments::McConfig::new(samples, seed).map_err(to_py_err)?;
    let rows = hermite::kform_limit_check(&coeffs, &sizes, &cfg, reference_n, &Caps::default())
        .map_err(to_py_err)?;
    rows_to_py(py, &rows)
}

/// Kolmogorov-Smirnov distance between seeded phi(f) samples and the
/// limiting centered normal law.
#[pyfunction]
fn clt_ks_check(py: Python<'_>, f: Py<GridFunction>, samples: u64, seed: u64) -> PyResult<f64> {
    let cfg = moments::McConfig::new(samples, seed).map_err(to_py_err)?;
    hermite::clt_ks_check(&f.borrow(py).inner, &cfg).map_err(to_py_err)
}

#[pymodule]
fn wicklab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<GridFunction>()?;
    m.add_class::<WickPolynomial>()?;
    m.add_function(wrap_pyfunction!(bernoulli_number, m)?)?;
    m.add_function(wrap_pyfunction!(eulerian_number, m)?)?;
    m.add_function(wrap_pyfunction!(block_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(alternating_eulerian_sum, m)?)?;
    m.add_function(wrap_pyfunction!(draw_signs, m)?)?;
    m.add_function(wrap_pyfunction!(phi_eval, m)?)?;
    m.add_function(wrap_pyfunction!(moment_formula, m)?)?;
    m.add_function(wrap_pyfunction!(moment_bruteforce, m)?)?;
    m.add_function(wrap_pyfunction!(moment_montecarlo, m)?)?;
    m.add_function(wrap_pyfunction!(symmetric_sign_moments, m)?)?;
    m.add_function(wrap_pyfunction!(wick_polynomial, m)?)?;
    m.add_function(wrap_pyfunction!(wick_power_of_noise, m)?)?;
    m.add_function(wrap_pyfunction!(stochastic_exponent_partial, m)?)?;
    m.add_function(wrap_pyfunction!(stochastic_exponent_closed, m)?)?;
    m.add_function(wrap_pyfunction!(wick_moment_traversal, m)?)?;
    m.add_function(wrap_pyfunction!(wick_moment_closed, m)?)?;
    m.add_function(wrap_pyfunction!(wick_moment_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_wick_moment, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(hermite_polynomial, m)?)?;
    m.add_function(wrap_pyfunction!(kform_limit_check, m)?)?;
    m.add_function(wrap_pyfunction!(clt_ks_check, m)?)?;
    Ok(())
}
