//! wicklab: exact moments, Wick powers, diagram sums, and Gaussian-limit
//! studies for the Bernoulli noise field, from the command line.
//!
//! Primary output (JSON, or CSV for `converge`) goes to stdout or --out;
//! timings and warnings go to stderr so identical configurations produce
//! byte-identical artifacts. Exit codes: 0 success, 1 failed `verify`,
//! 2 invalid input, 3 capacity exceeded, 4 I/O failure.

mod inputs;
mod outputs;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use wicklab::acceptance;
use wicklab::diagrams::{
    convergence_study, gaussian_wick_moment, wick_moment_closed, wick_moment_oracle,
    wick_moment_traversal, WickMomentSpec,
};
use wicklab::funcgrid::{parse_expr, riemann_inner_product, sample};
use wicklab::hermite::{cosine_basis, kform_limit_check, MultiIndexCoeffs};
use wicklab::moments::{
    draw_signs, moment_bruteforce, moment_montecarlo, moment_partition_formula, phi_eval,
    McConfig, MomentSpec,
};
use wicklab::stats::{ks_distance, normal_cdf};
use wicklab::wick::{
    stochastic_exponent_partial, symmetric_sign_moments, wick_polynomial, wick_power_of_noise,
};
use wicklab::{Caps, Error};

use inputs::{
    parse_expr_factor, parse_factor, parse_grid_list, parse_term, CliError, CliResult,
};
use outputs::{
    emit, emit_json, BaseEcho, DiagramsOutput, ExponentValue, FactorEcho, HermiteOutput,
    MomentsOutput, MonteCarloValue, SampleOutput, TermEcho, WickOutput,
};

#[derive(Parser)]
#[command(
    name = "wicklab",
    version,
    about = "Moment calculus for Bernoulli noise fields"
)]
struct Cli {
    /// Worker threads (0 = all cores); overrides WICKLAB_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Largest grid size for 2^n brute-force enumeration.
    #[arg(long, global = true, default_value_t = Caps::default().oracle_n)]
    oracle_n: usize,

    /// Largest total degree for partition enumeration.
    #[arg(long, global = true, default_value_t = Caps::default().partition_k)]
    partition_k: usize,

    /// Largest number of traversal combinations per diagram sum.
    #[arg(long, global = true, default_value_t = Caps::default().traversal_budget)]
    traversal_budget: u64,

    /// Largest number of expanded Wick monomials.
    #[arg(long, global = true, default_value_t = Caps::default().expansion_cap)]
    expansion_cap: u64,

    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

impl Cli {
    fn caps(&self) -> Caps {
        Caps {
            oracle_n: self.oracle_n,
            partition_k: self.partition_k,
            traversal_budget: self.traversal_budget,
            expansion_cap: self.expansion_cap,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineChoice {
    All,
    Formula,
    Bruteforce,
    Montecarlo,
}

impl EngineChoice {
    fn wants(self, engine: EngineChoice) -> bool {
        self == EngineChoice::All || self == engine
    }
}

#[derive(Subcommand)]
enum Command {
    /// Moments of products of noise fields, by formula, brute force, or
    /// Monte Carlo.
    Moments {
        /// Grid size.
        #[arg(long)]
        n: usize,
        /// Factor "expr[:power]" or "@grid.csv[:power]"; repeatable.
        #[arg(long = "factor", required = true)]
        factors: Vec<String>,
        #[arg(long, value_enum, default_value_t = EngineChoice::All)]
        engine: EngineChoice,
        /// Monte Carlo sample count.
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        /// Monte Carlo seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Wick polynomial family for the sign base or a noise field, with an
    /// optional stochastic-exponent partial sum.
    Wick {
        /// Largest polynomial degree.
        #[arg(long, default_value_t = 6)]
        degree: usize,
        /// Base the family on phi of this expression instead of a plain sign.
        #[arg(long = "f")]
        function: Option<String>,
        /// Grid size (required with --f).
        #[arg(long)]
        n: Option<usize>,
        /// Also evaluate the exponent partial sum at this alpha.
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        /// Evaluation point for the exponent partial sum.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        x: f64,
        /// Number of exponent terms.
        #[arg(long, default_value_t = 40)]
        terms: usize,
    },
    /// Full diagram expansion of a Wick product moment, next to the
    /// closed form, the Gaussian analogue, and the brute-force oracle.
    Diagrams {
        /// Grid size.
        #[arg(long)]
        n: usize,
        /// Wick factor "expr[:power]" or "@grid.csv[:power]"; repeatable.
        #[arg(long = "wick", required = true)]
        factors: Vec<String>,
    },
    /// Bernoulli-vs-Gaussian error table over a grid-size sweep (CSV).
    Converge {
        /// Wick factor "expr[:power]"; repeatable.
        #[arg(long = "wick", required = true)]
        factors: Vec<String>,
        /// Comma-separated ascending grid sizes, e.g. 8,16,32,64.
        #[arg(long)]
        grid: String,
    },
    /// Moments of a multilinear form against its Hermite chaos limit.
    Hermite {
        /// Number of cosine basis functions available to --term.
        #[arg(long, default_value_t = 2)]
        basis_size: usize,
        /// Coefficient entry "m1,...,mk:value"; repeatable.
        #[arg(long = "term", required = true)]
        terms: Vec<String>,
        /// Comma-separated ascending grid sizes.
        #[arg(long)]
        grid: String,
        /// Grid size for the limit's covariance integrals.
        #[arg(long, default_value_t = 4096)]
        reference_n: usize,
        #[arg(long, default_value_t = 2_000)]
        samples: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Seeded samples of phi(f) with summary statistics.
    Sample {
        /// Grid size.
        #[arg(long)]
        n: usize,
        /// Function expression.
        #[arg(long = "f")]
        function: String,
        #[arg(long, default_value_t = 1_000)]
        samples: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run the cross-engine verification battery; nonzero exit on failure.
    Verify {
        /// Emit the report as JSON instead of text lines.
        #[arg(long)]
        json: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Moments { .. } => "moments",
            Command::Wick { .. } => "wick",
            Command::Diagrams { .. } => "diagrams",
            Command::Converge { .. } => "converge",
            Command::Hermite { .. } => "hermite",
            Command::Sample { .. } => "sample",
            Command::Verify { .. } => "verify",
        }
    }
}

struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::Level::Warn
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            eprintln!("{}: {}", record.level().as_str().to_lowercase(), record.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

fn init_workers(threads: Option<usize>) {
    let count = threads.or_else(|| {
        std::env::var("WICKLAB_THREADS")
            .ok()
            .and_then(|raw| raw.parse().ok())
    });
    if let Some(count) = count {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build_global()
        {
            eprintln!("warning: thread pool already configured: {e}");
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let _ = log::set_logger(&LOGGER);
    log::set_max_level(log::LevelFilter::Warn);
    init_workers(cli.threads);
    let name = cli.command.name();
    let started = Instant::now();
    let result = run(cli);
    eprintln!("timing: {name} {:.3}s", started.elapsed().as_secs_f64());
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let caps = cli.caps();
    let out = cli.out;
    match cli.command {
        Command::Moments {
            n,
            factors,
            engine,
            samples,
            seed,
        } => run_moments(n, &factors, engine, samples, seed, &caps, &out),
        Command::Wick {
            degree,
            function,
            n,
            alpha,
            x,
            terms,
        } => run_wick(degree, function, n, alpha, x, terms, &caps, &out),
        Command::Diagrams { n, factors } => run_diagrams(n, &factors, &caps, &out),
        Command::Converge { factors, grid } => run_converge(&factors, &grid, &caps, &out),
        Command::Hermite {
            basis_size,
            terms,
            grid,
            reference_n,
            samples,
            seed,
        } => run_hermite(basis_size, &terms, &grid, reference_n, samples, seed, &caps, &out),
        Command::Sample {
            n,
            function,
            samples,
            seed,
        } => run_sample(n, &function, samples, seed, &out),
        Command::Verify { json } => run_verify(json, &caps, &out),
    }
}

type FactorList = Vec<(wicklab::funcgrid::GridFunction, usize)>;

fn collect_factors(raw: &[String], n: usize) -> CliResult<(FactorList, Vec<FactorEcho>)> {
    let mut factors = Vec::with_capacity(raw.len());
    let mut echo = Vec::with_capacity(raw.len());
    for arg in raw {
        let (grid, power, source) = parse_factor(arg, n)?;
        factors.push((grid, power));
        echo.push(FactorEcho { source, power });
    }
    Ok((factors, echo))
}

#[allow(clippy::too_many_arguments)]
fn run_moments(
    n: usize,
    raw_factors: &[String],
    engine: EngineChoice,
    samples: u64,
    seed: u64,
    caps: &Caps,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    let (factors, echo) = collect_factors(raw_factors, n)?;
    let spec = MomentSpec::new(factors)?;
    let formula = if engine.wants(EngineChoice::Formula) {
        Some(moment_partition_formula(&spec, caps)?)
    } else {
        None
    };
    let bruteforce = if engine.wants(EngineChoice::Bruteforce) {
        Some(moment_bruteforce(&spec, caps)?)
    } else {
        None
    };
    let montecarlo = if engine.wants(EngineChoice::Montecarlo) {
        let cfg = McConfig::new(samples, seed)?;
        let (value, std_error) = moment_montecarlo(&spec, &cfg);
        Some(MonteCarloValue {
            value,
            std_error,
            samples,
            seed,
        })
    } else {
        None
    };
    emit_json(
        out,
        &MomentsOutput {
            command: "moments",
            n,
            factors: echo,
            total_degree: spec.total_degree(),
            formula,
            bruteforce,
            montecarlo,
        },
    )
}

#[allow(clippy::too_many_arguments)]
fn run_wick(
    degree: usize,
    function: Option<String>,
    n: Option<usize>,
    alpha: Option<f64>,
    x: f64,
    terms: usize,
    caps: &Caps,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    let highest = degree.max(if alpha.is_some() { terms } else { 0 });
    let (base, moments) = match &function {
        None => (BaseEcho::Signs, symmetric_sign_moments(highest)),
        Some(source) => {
            let n = n.ok_or_else(|| Error::Invalid("--f needs --n".into()))?;
            let f = sample(&parse_expr(source, 1)?, n)?;
            let family = wick_power_of_noise(&f, highest, caps)?;
            (
                BaseEcho::Noise {
                    source: source.clone(),
                    n,
                },
                family.base_moments,
            )
        }
    };
    let polynomials = (0..=degree)
        .map(|m| wick_polynomial(&moments[..=m]))
        .collect::<wicklab::Result<Vec<_>>>()?;
    let exponent = match alpha {
        Some(alpha) => Some(ExponentValue {
            alpha,
            x,
            terms,
            partial_sum: stochastic_exponent_partial(alpha, &moments, x, terms)?,
            closed_form: function
                .is_none()
                .then(|| (alpha * x).exp() / alpha.cosh()),
        }),
        None => None,
    };
    emit_json(
        out,
        &WickOutput {
            command: "wick",
            base,
            degree,
            polynomials,
            exponent,
        },
    )
}

fn run_diagrams(
    n: usize,
    raw_factors: &[String],
    caps: &Caps,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    let (factors, echo) = collect_factors(raw_factors, n)?;
    let spec = WickMomentSpec::new(factors)?;
    let (total, terms) = wick_moment_traversal(&spec, caps)?;
    let closed = wick_moment_closed(&spec, caps)?;
    let gaussian = gaussian_wick_moment(&spec, caps)?;
    let oracle = if n <= caps.oracle_n {
        Some(wick_moment_oracle(&spec, caps)?)
    } else {
        None
    };
    emit_json(
        out,
        &DiagramsOutput {
            command: "diagrams",
            n,
            factors: echo,
            total,
            closed,
            gaussian,
            oracle,
            terms,
        },
    )
}

fn run_converge(
    raw_factors: &[String],
    grid: &str,
    caps: &Caps,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    let mut factors = Vec::with_capacity(raw_factors.len());
    for arg in raw_factors {
        let (expr, power, _) = parse_expr_factor(arg)?;
        factors.push((expr, power));
    }
    let sizes = parse_grid_list(grid)?;
    let rows = convergence_study(&factors, &sizes, caps)?;
    let mut csv = String::from("n,bernoulli,gaussian,abs_error,error_times_n\n");
    for row in rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.n,
            row.bernoulli,
            row.gaussian,
            row.abs_error,
            row.error_times_n()
        ));
    }
    emit(out, &csv)
}

#[allow(clippy::too_many_arguments)]
fn run_hermite(
    basis_size: usize,
    raw_terms: &[String],
    grid: &str,
    reference_n: usize,
    samples: u64,
    seed: u64,
    caps: &Caps,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    let basis = (1..=basis_size)
        .map(cosine_basis)
        .collect::<wicklab::Result<Vec<_>>>()?;
    let mut entries = Vec::with_capacity(raw_terms.len());
    let mut echo = Vec::with_capacity(raw_terms.len());
    for raw in raw_terms {
        let (indices, coefficient) = parse_term(raw)?;
        echo.push(TermEcho {
            indices: indices.clone(),
            coefficient,
        });
        entries.push((indices, coefficient));
    }
    let coeffs = MultiIndexCoeffs::new(basis, entries)?;
    let sizes = parse_grid_list(grid)?;
    let cfg = McConfig::new(samples, seed)?;
    let rows = kform_limit_check(&coeffs, &sizes, &cfg, reference_n, caps)?;
    emit_json(
        out,
        &HermiteOutput {
            command: "hermite",
            basis_size,
            terms: echo,
            grid: sizes,
            reference_n,
            samples,
            seed,
            rows,
        },
    )
}

fn run_sample(
    n: usize,
    function: &str,
    samples: u64,
    seed: u64,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    let f = sample(&parse_expr(function, 1)?, n)?;
    let variance_target = riemann_inner_product(&f, &f)?;
    let mut values = Vec::with_capacity(samples as usize);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for s in 0..samples {
        let value = phi_eval(&f, &draw_signs(seed, s, n)).expect("matching n");
        sum += value;
        sum_sq += value * value;
        values.push(value);
    }
    let ks_distance = if variance_target > 0.0 {
        let sigma = variance_target.sqrt();
        let mut sorted = values.clone();
        sorted.sort_unstable_by(f64::total_cmp);
        Some(ks_distance(&sorted, |v| normal_cdf(v / sigma)))
    } else {
        None
    };
    emit_json(
        out,
        &SampleOutput {
            command: "sample",
            source: function.to_string(),
            n,
            samples,
            seed,
            variance_target,
            mean: sum / samples as f64,
            second_moment: sum_sq / samples as f64,
            ks_distance,
            values,
        },
    )
}

fn run_verify(json: bool, caps: &Caps, out: &Option<PathBuf>) -> CliResult<()> {
    let reports = acceptance::run_all(caps);
    let text = if json {
        serde_json::to_string_pretty(&reports).expect("serializable reports")
    } else {
        reports
            .iter()
            .map(|r| r.line())
            .collect::<Vec<_>>()
            .join("\n")
    };
    emit(out, &text)?;
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}
