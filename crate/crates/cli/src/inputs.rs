//! Flag-payload parsing: factors, coefficient terms, grid-size lists.

use wicklab::funcgrid::{parse_expr, sample, Expr, GridFunction};
use wicklab::{Error, Result};

/// Errors leaving the process, grouped by exit code: invalid input or
/// specs exit 2, capacity violations 3, I/O failures 4, and a failed
/// `verify` run 1.
#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io(std::io::Error),
    VerifyFailed(usize),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_capacity_error() => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 4,
            CliError::VerifyFailed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::VerifyFailed(k) => write!(f, "verification failed: {k} criteria"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Split an optional ":power" suffix off a factor argument. Only a valid
/// integer after the last colon counts, so expressions stay unambiguous.
fn split_power(raw: &str) -> (&str, usize) {
    if let Some(pos) = raw.rfind(':') {
        if let Ok(power) = raw[pos + 1..].trim().parse::<usize>() {
            return (&raw[..pos], power);
        }
    }
    (raw, 1)
}

/// A "expr[:power]" or "@grid.csv[:power]" factor, sampled or loaded onto
/// the n-point grid.
pub fn parse_factor(raw: &str, n: usize) -> CliResult<(GridFunction, usize, String)> {
    let (source, power) = split_power(raw);
    let grid = if let Some(path) = source.strip_prefix('@') {
        let text = std::fs::read_to_string(path)?;
        let grid = GridFunction::from_csv(&text)?;
        if grid.n() != n {
            return Err(Error::GridMismatch {
                message: format!("{path} holds an n={} grid, expected n={n}", grid.n()),
            }
            .into());
        }
        if grid.arity() != 1 {
            return Err(Error::GridMismatch {
                message: format!("{path} holds an arity-{} grid, factors need arity 1", grid.arity()),
            }
            .into());
        }
        grid
    } else {
        sample(&parse_expr(source, 1)?, n)?
    };
    Ok((grid, power, source.to_string()))
}

/// A "expr[:power]" factor kept symbolic for grid-size sweeps.
pub fn parse_expr_factor(raw: &str) -> Result<(Expr, usize, String)> {
    let (source, power) = split_power(raw);
    if source.starts_with('@') {
        return Err(Error::Invalid(format!(
            "{source}: grid files cannot be resampled across sizes, pass an expression"
        )));
    }
    Ok((parse_expr(source, 1)?, power, source.to_string()))
}

/// A comma-separated list of grid sizes.
pub fn parse_grid_list(raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|piece| {
            piece
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Invalid(format!("bad grid size `{piece}` in `{raw}`")))
        })
        .collect()
}

/// A coefficient entry "m1,...,mk:value" for a multi-index family.
pub fn parse_term(raw: &str) -> Result<(Vec<usize>, f64)> {
    let (indices, value) = raw
        .rsplit_once(':')
        .ok_or_else(|| Error::Invalid(format!("`{raw}`: expected m1,...,mk:value")))?;
    let tuple = indices
        .split(',')
        .map(|piece| {
            piece
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Invalid(format!("bad basis index `{piece}` in `{raw}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let coefficient = value
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Invalid(format!("bad coefficient `{value}` in `{raw}`")))?;
    Ok((tuple, coefficient))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_suffix_rules() {
        assert_eq!(split_power("x^2:3"), ("x^2", 3));
        assert_eq!(split_power("x^2"), ("x^2", 1));
        assert_eq!(split_power("@f.csv:2"), ("@f.csv", 2));
        // a non-integer suffix belongs to the source text
        assert_eq!(split_power("1:x"), ("1:x", 1));
    }

    #[test]
    fn grid_lists_and_terms() {
        assert_eq!(parse_grid_list("8, 16,32").unwrap(), vec![8, 16, 32]);
        assert!(parse_grid_list("8,sixteen").is_err());
        assert_eq!(parse_term("1,2:0.5").unwrap(), (vec![1, 2], 0.5));
        assert_eq!(parse_term("3:-1.25").unwrap(), (vec![3], -1.25));
        assert!(parse_term("1,2").is_err());
    }

    #[test]
    fn factor_expressions_sample_onto_the_grid() {
        let (grid, power, source) = parse_factor("x^2:2", 4).unwrap();
        assert_eq!(power, 2);
        assert_eq!(source, "x^2");
        assert_eq!(grid.values(), &[0.0625, 0.25, 0.5625, 1.0]);
        assert!(parse_factor("x +", 4).is_err());
        assert!(parse_expr_factor("@f.csv:2").is_err());
    }
}
