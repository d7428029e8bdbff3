//! Wick (orthogonalized) powers. For a random variable eta with moments
//! mu_i, the Wick polynomials are the monic family fixed by P_0 = 1,
//! d/dx P_m = m P_{m-1}, and E[P_m(eta)] = 0; evaluating P_m at the noise
//! field phi(f) realizes the Wick power :phi^m(f): pathwise. The
//! stochastic exponent sum_n alpha^n P_n / n! has the closed form
//! exp(alpha eta) / E exp(alpha eta).

use num_traits::ToPrimitive;
use serde::Serialize;

use crate::accum::KahanSum;
use crate::error::{Error, Result};
use crate::funcgrid::GridFunction;
use crate::moments::{moment_partition_formula, phi_eval, MomentSpec, SignVector};
use crate::numbers::binomial;
use crate::Caps;

/// A monic polynomial P_m together with the base moments that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WickPolynomial {
    pub degree: usize,
    /// Coefficient of x^i at index i; length degree + 1.
    pub coeffs: Vec<f64>,
    /// mu_i = E[eta^i] for i = 0..=degree.
    pub base_moments: Vec<f64>,
}

impl WickPolynomial {
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Coefficients of d/dx P_m; the defining relations make these equal
    /// to m times the coefficients of P_{m-1}.
    pub fn derivative_coeffs(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| i as f64 * c)
            .collect()
    }
}

/// Coefficient tables for P_0..P_m from the recursion
/// P_m(x) = x^m - sum_{i=1}^m C(m,i) mu_i P_{m-i}(x).
fn wick_family(moments: &[f64]) -> Result<Vec<Vec<f64>>> {
    match moments.first() {
        Some(&1.0) => {}
        Some(&mu0) => {
            return Err(Error::InvalidMoments(format!(
                "mu_0 must be 1, got {mu0}"
            )))
        }
        None => return Err(Error::InvalidMoments("moment array is empty".into())),
    }
    if let Some(bad) = moments.iter().find(|m| !m.is_finite()) {
        return Err(Error::InvalidMoments(format!("non-finite moment {bad}")));
    }
    let top = moments.len() - 1;
    let mut family: Vec<Vec<f64>> = Vec::with_capacity(top + 1);
    family.push(vec![1.0]);
    for m in 1..=top {
        let mut coeffs = vec![0.0; m + 1];
        coeffs[m] = 1.0;
        for i in 1..=m {
            let c = binomial(m as u32, i as u32)
                .to_f64()
                .ok_or_else(|| Error::Overflow(format!("binomial({m},{i})")))?;
            let weight = c * moments[i];
            for (j, prev) in family[m - i].iter().enumerate() {
                coeffs[j] -= weight * prev;
            }
        }
        family.push(coeffs);
    }
    Ok(family)
}

/// The Wick polynomial of degree moments.len()-1 for a variable with the
/// given moments mu_0..mu_m (mu_0 must be 1).
pub fn wick_polynomial(moments: &[f64]) -> Result<WickPolynomial> {
    let family = wick_family(moments)?;
    Ok(WickPolynomial {
        degree: moments.len() - 1,
        coeffs: family.last().expect("family is nonempty").clone(),
        base_moments: moments.to_vec(),
    })
}

/// Moments mu_0..mu_m of a single symmetric sign: 1 for even i, 0 for odd.
pub fn symmetric_sign_moments(degree: usize) -> Vec<f64> {
    (0..=degree)
        .map(|i| if i % 2 == 0 { 1.0 } else { 0.0 })
        .collect()
}

/// The Wick power :phi^m(f): as a polynomial in the scalar phi(f), built
/// from the exact moments mu_i = E[phi^i(f)] of the partition engine.
pub fn wick_power_of_noise(f: &GridFunction, m: usize, caps: &Caps) -> Result<WickPolynomial> {
    let mut moments = Vec::with_capacity(m + 1);
    moments.push(1.0);
    for i in 1..=m {
        let spec = MomentSpec::new(vec![(f.clone(), i)])?;
        moments.push(moment_partition_formula(&spec, caps)?);
    }
    wick_polynomial(&moments)
}

/// Partial sum sum_{n=0}^{N} alpha^n P_n(x) / n! of the stochastic
/// exponent, with every P_n built from the same moment array (which must
/// therefore reach mu_N).
pub fn stochastic_exponent_partial(
    alpha: f64,
    moments: &[f64],
    x: f64,
    terms: usize,
) -> Result<f64> {
    if moments.len() < terms + 1 {
        return Err(Error::InvalidMoments(format!(
            "need mu_0..mu_{terms}, got {} moments",
            moments.len()
        )));
    }
    let family = wick_family(&moments[..=terms])?;
    let mut acc = KahanSum::default();
    let mut weight = 1.0; // alpha^n / n!
    for (n, coeffs) in family.iter().enumerate() {
        if n > 0 {
            weight *= alpha / n as f64;
        }
        let mut p = 0.0;
        for &c in coeffs.iter().rev() {
            p = p * x + c;
        }
        acc.add(weight * p);
    }
    Ok(acc.value())
}

/// ln cosh t without overflow for large |t|.
fn ln_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// The Wick exponent :exp(alpha phi(f)): on one sign path, via its closed
/// form exp(alpha phi) / prod_k cosh(alpha f(k/n) / sqrt(n)). Evaluated in
/// the log domain so the product over the grid cannot overflow on its own;
/// only a genuinely extreme alpha * phi makes the result non-finite.
pub fn stochastic_exponent_closed(alpha: f64, f: &GridFunction, eps: &SignVector) -> Result<f64> {
    let phi = phi_eval(f, eps)?;
    let scale = (f.n() as f64).sqrt().recip();
    let mut log_denominator = KahanSum::default();
    for v in f.values() {
        log_denominator.add(ln_cosh(alpha * v * scale));
    }
    let value = (alpha * phi - log_denominator.value()).exp();
    if !value.is_finite() {
        return Err(Error::Overflow(format!(
            "stochastic exponent at alpha = {alpha}"
        )));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcgrid::{parse_expr, sample};
    use crate::moments::moment_bruteforce;
    use approx::assert_relative_eq;

    fn grid(src: &str, n: usize) -> GridFunction {
        sample(&parse_expr(src, 1).unwrap(), n).unwrap()
    }

    /// mu_0..mu_degree of a standard Gaussian: (i-1)!! for even i.
    fn gaussian_moments(degree: usize) -> Vec<f64> {
        let mut out = vec![1.0];
        for i in 1..=degree {
            if i % 2 == 1 {
                out.push(0.0);
            } else {
                let double_factorial: f64 =
                    (1..i).step_by(2).map(|j| j as f64).product();
                out.push(double_factorial);
            }
        }
        out
    }

    #[test]
    fn sign_basis_examples() {
        assert_eq!(wick_polynomial(&symmetric_sign_moments(0)).unwrap().coeffs, vec![1.0]);
        assert_eq!(
            wick_polynomial(&symmetric_sign_moments(2)).unwrap().coeffs,
            vec![-1.0, 0.0, 1.0]
        );
        assert_eq!(
            wick_polynomial(&symmetric_sign_moments(3)).unwrap().coeffs,
            vec![0.0, -3.0, 0.0, 1.0]
        );
        assert_eq!(
            wick_polynomial(&symmetric_sign_moments(4)).unwrap().coeffs,
            vec![5.0, 0.0, -6.0, 0.0, 1.0]
        );
    }

    #[test]
    fn gaussian_basis_gives_hermite() {
        assert_eq!(
            wick_polynomial(&gaussian_moments(3)).unwrap().coeffs,
            vec![0.0, -3.0, 0.0, 1.0]
        );
        assert_eq!(
            wick_polynomial(&gaussian_moments(4)).unwrap().coeffs,
            vec![3.0, 0.0, -6.0, 0.0, 1.0]
        );
    }

    #[test]
    fn rejects_bad_moment_arrays() {
        assert!(wick_polynomial(&[]).is_err());
        assert!(wick_polynomial(&[2.0, 0.0]).is_err());
        assert!(wick_polynomial(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn defining_relations_hold_through_degree_twelve() {
        for moments in [symmetric_sign_moments(12), gaussian_moments(12)] {
            let family: Vec<WickPolynomial> = (0..=12)
                .map(|m| wick_polynomial(&moments[..=m]).unwrap())
                .collect();
            for m in 1..=12usize {
                let p = &family[m];
                assert_eq!(p.coeffs.len(), m + 1);
                assert_eq!(p.coeffs[m], 1.0, "monic at degree {m}");
                // d/dx P_m = m P_{m-1}
                let derivative = p.derivative_coeffs();
                for (j, d) in derivative.iter().enumerate() {
                    let want = m as f64 * family[m - 1].coeffs[j];
                    assert!(
                        (d - want).abs() <= 1e-9 * (1.0 + want.abs()),
                        "derivative coeff {j} of P_{m}: {d} vs {want}"
                    );
                }
                // E[P_m(eta)] = 0
                let mean: f64 = p
                    .coeffs
                    .iter()
                    .zip(&moments)
                    .map(|(c, mu)| c * mu)
                    .sum();
                assert!(mean.abs() <= 1e-9, "mean of P_{m} is {mean}");
            }
        }
    }

    #[test]
    fn wick_power_of_noise_examples() {
        let caps = Caps::default();
        let ones = grid("1", 2);
        assert_eq!(
            wick_power_of_noise(&ones, 1, &caps).unwrap().coeffs,
            vec![0.0, 1.0]
        );
        assert_eq!(
            wick_power_of_noise(&ones, 2, &caps).unwrap().coeffs,
            vec![-1.0, 0.0, 1.0]
        );
        assert_eq!(
            wick_power_of_noise(&ones, 3, &caps).unwrap().coeffs,
            vec![0.0, -3.0, 0.0, 1.0]
        );
    }

    #[test]
    fn wick_powers_average_to_zero_pathwise() {
        let caps = Caps::default();
        let n = 8;
        let f = grid("x", n);
        for m in 1..=6 {
            let p = wick_power_of_noise(&f, m, &caps).unwrap();
            let mut acc = KahanSum::default();
            for mask in 0..1u64 << n {
                let eps = SignVector::from_mask(mask, n);
                acc.add(p.eval(phi_eval(&f, &eps).unwrap()));
            }
            let mean = acc.value() / (1u64 << n) as f64;
            assert!(mean.abs() <= 1e-10, "degree {m} mean {mean}");
        }
    }

    #[test]
    fn exponent_partial_hits_closed_values() {
        let moments = symmetric_sign_moments(40);
        assert_eq!(
            stochastic_exponent_partial(0.0, &moments, 3.7, 40).unwrap(),
            1.0
        );
        let e_over_cosh1 = std::f64::consts::E / 1f64.cosh();
        assert!(
            (stochastic_exponent_partial(1.0, &moments, 1.0, 40).unwrap() - e_over_cosh1)
                .abs()
                < 1e-8
        );
        let half = (-0.5f64).exp() / 0.5f64.cosh();
        assert!(
            (stochastic_exponent_partial(0.5, &moments, -1.0, 40).unwrap() - half).abs()
                < 1e-8
        );
        assert!(stochastic_exponent_partial(1.0, &moments[..10], 1.0, 40).is_err());
    }

    #[test]
    fn exponent_partial_error_decreases_in_n() {
        let moments = symmetric_sign_moments(40);
        for alpha in [0.25f64, 0.5, 1.0] {
            for x in [-1.0f64, 1.0] {
                let closed = (alpha * x).exp() / alpha.cosh();
                let mut prev = f64::INFINITY;
                for terms in 1..=40 {
                    let err = (stochastic_exponent_partial(alpha, &moments, x, terms)
                        .unwrap()
                        - closed)
                        .abs();
                    // plateaus happen once the error reaches rounding level
                    assert!(
                        err <= prev + 1e-15,
                        "alpha={alpha} x={x} N={terms}: {err} > {prev}"
                    );
                    prev = err;
                }
                assert!(prev < 1e-8, "alpha={alpha} x={x}: final error {prev}");
            }
        }
    }

    #[test]
    fn closed_exponent_examples() {
        let one_point = grid("1", 1);
        let plus = SignVector::from_mask(0b1, 1);
        assert_relative_eq!(
            stochastic_exponent_closed(0.0, &one_point, &plus).unwrap(),
            1.0
        );
        assert_relative_eq!(
            stochastic_exponent_closed(1.0, &one_point, &plus).unwrap(),
            std::f64::consts::E / 1f64.cosh(),
            max_relative = 1e-14
        );
        // length mismatch is an input error
        assert!(stochastic_exponent_closed(1.0, &grid("x", 3), &plus).is_err());
    }

    #[test]
    fn closed_exponent_has_unit_mean() {
        let n = 8;
        let f = grid("cos(x)", n);
        let mut acc = KahanSum::default();
        for mask in 0..1u64 << n {
            let eps = SignVector::from_mask(mask, n);
            acc.add(stochastic_exponent_closed(0.7, &f, &eps).unwrap());
        }
        let mean = acc.value() / (1u64 << n) as f64;
        assert!((mean - 1.0).abs() <= 1e-10, "mean {mean}");
    }

    #[test]
    fn partial_sums_converge_to_closed_form_on_noise_paths() {
        let caps = Caps::default();
        let n = 3;
        let f = grid("x", n);
        // scalar moments of phi(f) from the exhaustive engine
        let mut moments = vec![1.0];
        for i in 1..=40 {
            let spec = MomentSpec::new(vec![(f.clone(), i)]).unwrap();
            moments.push(moment_bruteforce(&spec, &caps).unwrap());
        }
        let alpha = 0.5;
        for mask in 0..1u64 << n {
            let eps = SignVector::from_mask(mask, n);
            let x = phi_eval(&f, &eps).unwrap();
            let partial = stochastic_exponent_partial(alpha, &moments, x, 40).unwrap();
            let closed = stochastic_exponent_closed(alpha, &f, &eps).unwrap();
            assert!(
                (partial - closed).abs() < 1e-6,
                "mask {mask}: partial {partial} vs closed {closed}"
            );
        }
    }

    #[test]
    fn ln_cosh_is_stable_for_large_arguments() {
        assert_relative_eq!(ln_cosh(0.0), 0.0);
        assert_relative_eq!(ln_cosh(3.0), 3f64.cosh().ln(), max_relative = 1e-14);
        let big = 800.0;
        assert_relative_eq!(
            ln_cosh(big),
            big - std::f64::consts::LN_2,
            max_relative = 1e-14
        );
        assert_eq!(ln_cosh(-5.0), ln_cosh(5.0));
    }
}
