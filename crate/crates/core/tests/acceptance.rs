//! The verification battery as ten independent test cases. Each prints
//! its one-line verdict (run with --nocapture to see passing lines too)
//! and fails the build if its criterion fails.

use wicklab::acceptance;
use wicklab::Caps;

fn check(report: acceptance::CriterionReport) {
    println!("{}", report.line());
    assert!(report.passed, "{}", report.line());
}

#[test]
fn criterion_01_wick_square_pair_closed_form() {
    check(acceptance::criterion_1(&Caps::default()));
}

#[test]
fn criterion_02_cube_against_line_negativity() {
    check(acceptance::criterion_2(&Caps::default()));
}

#[test]
fn criterion_03_moment_formula_vs_enumeration() {
    check(acceptance::criterion_3(&Caps::default()));
}

#[test]
fn criterion_04_eulerian_collapse() {
    check(acceptance::criterion_4(&Caps::default()));
}

#[test]
fn criterion_05_wick_polynomial_laws() {
    check(acceptance::criterion_5(&Caps::default()));
}

#[test]
fn criterion_06_stochastic_exponent() {
    check(acceptance::criterion_6(&Caps::default()));
}

#[test]
fn criterion_07_normal_limit_of_the_field() {
    check(acceptance::criterion_7(&Caps::default()));
}

#[test]
fn criterion_08_gaussian_replacement_rate() {
    check(acceptance::criterion_8(&Caps::default()));
}

#[test]
fn criterion_09_form_orthogonality() {
    check(acceptance::criterion_9(&Caps::default()));
}

#[test]
fn criterion_10_hermite_chaos_limit() {
    check(acceptance::criterion_10(&Caps::default()));
}
