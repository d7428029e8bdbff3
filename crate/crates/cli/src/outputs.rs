//! JSON payloads. One object per run, echoing the configuration next to
//! the computed values so artifacts are self-describing; field order is
//! fixed by the struct definitions, keeping reruns byte-identical.

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use wicklab::diagrams::DiagramTerm;
use wicklab::hermite::LimitRow;
use wicklab::wick::WickPolynomial;

use crate::inputs::CliResult;

#[derive(Serialize)]
pub struct FactorEcho {
    pub source: String,
    pub power: usize,
}

#[derive(Serialize)]
pub struct MonteCarloValue {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

#[derive(Serialize)]
pub struct MomentsOutput {
    pub command: &'static str,
    pub n: usize,
    pub factors: Vec<FactorEcho>,
    pub total_degree: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bruteforce: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub montecarlo: Option<MonteCarloValue>,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseEcho {
    Signs,
    Noise { source: String, n: usize },
}

#[derive(Serialize)]
pub struct ExponentValue {
    pub alpha: f64,
    pub x: f64,
    pub terms: usize,
    pub partial_sum: f64,
    /// e^{alpha x} / cosh(alpha); only the sign base has a scalar target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<f64>,
}

#[derive(Serialize)]
pub struct WickOutput {
    pub command: &'static str,
    pub base: BaseEcho,
    pub degree: usize,
    pub polynomials: Vec<WickPolynomial>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<ExponentValue>,
}

#[derive(Serialize)]
pub struct DiagramsOutput {
    pub command: &'static str,
    pub n: usize,
    pub factors: Vec<FactorEcho>,
    pub total: f64,
    pub closed: f64,
    pub gaussian: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<f64>,
    pub terms: Vec<DiagramTerm>,
}

#[derive(Serialize)]
pub struct TermEcho {
    pub indices: Vec<usize>,
    pub coefficient: f64,
}

#[derive(Serialize)]
pub struct HermiteOutput {
    pub command: &'static str,
    pub basis_size: usize,
    pub terms: Vec<TermEcho>,
    pub grid: Vec<usize>,
    pub reference_n: usize,
    pub samples: u64,
    pub seed: u64,
    pub rows: Vec<LimitRow>,
}

#[derive(Serialize)]
pub struct SampleOutput {
    pub command: &'static str,
    pub source: String,
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    /// riemann_inner_product(f, f), the limiting normal variance.
    pub variance_target: f64,
    pub mean: f64,
    pub second_moment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_distance: Option<f64>,
    pub values: Vec<f64>,
}

/// Write the primary artifact to --out or stdout, newline-terminated.
pub fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    let terminated = if text.ends_with('\n') {
        text.to_string()
    } else {
        format!("{text}\n")
    };
    match out {
        Some(path) => std::fs::write(path, terminated)?,
        None => std::io::stdout().write_all(terminated.as_bytes())?,
    }
    Ok(())
}

pub fn emit_json<T: Serialize>(out: &Option<PathBuf>, payload: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(payload).expect("serializable payload");
    emit(out, &text)
}
