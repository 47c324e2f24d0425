//! `linea`: command-line front end for the linea library.

mod commands;
mod config;
mod error;
mod output;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use linea::{Complex64, Polynomial, RegionSpec, Verdict};

use config::{parse_count, OutputFormat, Overrides, RunConfig};
use error::{CliError, EXIT_NUMERICAL, EXIT_USAGE};
use output::{Diagnostics, ErrorInfo, Report};

#[derive(Debug, Parser)]
#[command(
    name = "linea",
    version,
    about = "Poincaré functions of polynomials: series, growth, area sums and pushforwards"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Seed for Monte Carlo streams [default: 1]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tree depth or number of bands [default: 12]
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Monte Carlo samples, e.g. 1e5 [default: 100000]
    #[arg(long, global = true, value_parser = count_arg)]
    samples: Option<u64>,
    /// Root-finding tolerance [default: 1e-12]
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output format [default: json]
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Write output to this file instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Flat `key = value` file with defaults for the options above
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 1 gives the sequential reference run
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exit with status 2 unless the reported verdict is this one
    #[arg(long, global = true, value_enum)]
    require_verdict: Option<VerdictArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum VerdictArg {
    Converged,
    DivergingSuspected,
    Undecided,
}

impl VerdictArg {
    fn matches(self, v: Verdict) -> bool {
        matches!(
            (self, v),
            (VerdictArg::Converged, Verdict::Converged)
                | (VerdictArg::DivergingSuspected, Verdict::DivergingSuspected)
                | (VerdictArg::Undecided, Verdict::Undecided)
        )
    }
}

fn count_arg(s: &str) -> Result<u64, String> {
    parse_count(s).ok_or_else(|| format!("{s:?} is not a nonnegative integer"))
}

fn poly_arg(s: &str) -> Result<Polynomial, parse::ParseError> {
    parse::polynomial(s)
}

fn complex_arg(s: &str) -> Result<Complex64, parse::ParseError> {
    parse::complex(s)
}

fn real_arg(s: &str) -> Result<f64, parse::ParseError> {
    parse::real(s)
}

/// A comma-separated list given as a single argument.
#[derive(Clone, Debug)]
struct RealList(Vec<f64>);

fn list_arg(s: &str) -> Result<RealList, parse::ParseError> {
    parse::real_list(s).map(RealList)
}

fn region_arg(s: &str) -> Result<RegionSpec, parse::ParseError> {
    parse::region(s)
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Roots of a polynomial
    Roots(PolyArgs),
    /// Fixed points with multipliers and classification
    FixedPoints(PolyArgs),
    /// Critical points, postcritical points and connectivity
    CriticalOrbit {
        #[command(flatten)]
        poly: PolyArgs,
        #[arg(long, default_value_t = 256)]
        n_max: usize,
    },
    /// Iterated preimages of a point, level by level
    Preimages {
        #[command(flatten)]
        poly: PolyArgs,
        #[arg(long, value_parser = complex_arg)]
        w: Complex64,
    },
    /// Level sums of sum |(p^n)'(z)|^-t over iterated preimages
    PoincareSeries {
        #[command(flatten)]
        poly: PolyArgs,
        #[arg(long, value_parser = complex_arg)]
        w: Complex64,
        #[arg(long, default_value = "2", value_parser = real_arg)]
        t: f64,
        /// Only count preimages inside this region
        #[arg(long, value_parser = region_arg)]
        region: Option<RegionSpec>,
    },
    /// Linearizer at a repelling fixed point
    #[command(subcommand)]
    Linearize(LinearizeCommand),
    /// Order of growth of a linearizer (same as `linearize order`)
    Order(OrderArgs),
    /// Area-property sums and cylindrical areas
    #[command(subcommand)]
    Area(AreaCommand),
    /// Quadratic differentials
    #[command(subcommand)]
    Qd(QdCommand),
    /// Order of growth from Schwarzian or singularity data
    SchwarzianOrder {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        value: u64,
    },
}

#[derive(Debug, Args)]
struct PolyArgs {
    /// Polynomial in z, e.g. "z^2-1" or "(0.5+2i)*z + z^3"
    #[arg(long, value_parser = poly_arg)]
    poly: Polynomial,
}

#[derive(Debug, Args)]
struct LinArgs {
    #[arg(long, value_parser = poly_arg)]
    poly: Polynomial,
    /// Approximate repelling fixed point; snapped to the nearest computed one
    #[arg(long, value_parser = complex_arg)]
    fixed_point: Complex64,
    /// Truncation order of the Koenigs series
    #[arg(long, default_value_t = linea::linearizer::DEFAULT_SERIES_ORDER)]
    order: usize,
}

#[derive(Debug, Args)]
struct OrderArgs {
    #[command(flatten)]
    lin: LinArgs,
    /// Fit growth on circles instead of using the exact formula
    #[arg(long)]
    empirical: bool,
    #[arg(long, default_value = "1e2,1e3,1e4,1e5", value_parser = list_arg)]
    radii: RealList,
    #[arg(long, default_value_t = linea::linearizer::DEFAULT_CIRCLE_SAMPLES)]
    samples_per_circle: usize,
}

#[derive(Debug, Subcommand)]
enum LinearizeCommand {
    /// Koenigs coefficients, injectivity radius and residual
    Coeffs(LinArgs),
    /// f(z) and f'(z)
    Eval {
        #[command(flatten)]
        lin: LinArgs,
        #[arg(long, value_parser = complex_arg)]
        z: Complex64,
    },
    /// Order of growth
    Order(OrderArgs),
    /// Preimages of w in the bands eta |lambda|^(n-1) < |z| <= eta |lambda|^n, n <= depth
    Preimages {
        #[command(flatten)]
        lin: LinArgs,
        #[arg(long, value_parser = complex_arg)]
        w: Complex64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MapKind {
    Exp,
    CoshSqrt,
    Linearizer,
}

#[derive(Debug, Args)]
struct MapArgs {
    /// exp and cosh-sqrt use closed forms; linearizer needs --poly and --fixed-point
    #[arg(long, value_enum, default_value_t = MapKind::Exp)]
    map: MapKind,
    #[arg(long, value_parser = poly_arg)]
    poly: Option<Polynomial>,
    #[arg(long, value_parser = complex_arg)]
    fixed_point: Option<Complex64>,
    #[arg(long, default_value_t = linea::linearizer::DEFAULT_SERIES_ORDER)]
    order: usize,
}

#[derive(Debug, Subcommand)]
enum AreaCommand {
    /// sum 1/(|z| |f'(z)|)^t over preimages with |z| >= 1
    Sum {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, value_parser = complex_arg)]
        w: Complex64,
        #[arg(long, default_value = "2", value_parser = real_arg)]
        t: f64,
        /// Largest branch index for closed-form maps (linearizers use --depth bands)
        #[arg(long, default_value_t = 10_000)]
        k_max: u64,
    },
    /// Monte Carlo cylindrical area of f^-1(K) in 1 < |z| < r_max
    Mc {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, value_parser = region_arg)]
        region: RegionSpec,
        #[arg(long, value_parser = real_arg)]
        r_max: f64,
        #[arg(long, default_value_t = linea::area::DEFAULT_PARTITIONS)]
        partitions: usize,
    },
    /// Cylindrical area A_n of f^-1(K) in 1 <= |z| <= |lambda|^n
    ElGrowth {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, value_parser = region_arg)]
        region: RegionSpec,
        #[arg(long, default_value_t = 7)]
        n_max: usize,
        #[arg(long, default_value_t = linea::area::DEFAULT_PARTITIONS)]
        partitions: usize,
    },
    /// sum dist(z, f^-1(K))^2/|z|^2 for exp and the negative real ray
    Distance {
        #[arg(long, value_parser = complex_arg)]
        w: Complex64,
        #[arg(long, default_value = "ray:0:-1", value_parser = region_arg)]
        region: RegionSpec,
        #[arg(long, default_value_t = 10_000)]
        k_max: u64,
    },
    /// Poincaré series inside and outside a Siegel disc of e^(2 pi i theta) z + z^2
    Siegel {
        /// Rotation number [default: golden mean]
        #[arg(long, value_parser = real_arg)]
        theta: Option<f64>,
        #[arg(long, default_value = "0.1", value_parser = complex_arg)]
        w_in: Complex64,
        #[arg(long, default_value = "3", value_parser = complex_arg)]
        w_out: Complex64,
    },
}

#[derive(Debug, Args)]
struct QdArgs {
    /// Numerator of q
    #[arg(long, default_value = "1", value_parser = poly_arg)]
    q_num: Polynomial,
    /// Denominator of q
    #[arg(long, default_value = "z^2", value_parser = poly_arg)]
    q_den: Polynomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PushforwardKind {
    Exp,
    Linearizer,
}

#[derive(Debug, Subcommand)]
enum QdCommand {
    /// sigma(w) = sum q(z)/f'(z)^2 over preimages of w
    Pushforward {
        #[arg(long, value_enum, default_value_t = PushforwardKind::Exp)]
        map: PushforwardKind,
        #[arg(long, value_parser = poly_arg)]
        poly: Option<Polynomial>,
        #[arg(long, value_parser = complex_arg)]
        fixed_point: Option<Complex64>,
        #[arg(long, default_value_t = linea::linearizer::DEFAULT_SERIES_ORDER)]
        order: usize,
        #[command(flatten)]
        q: QdArgs,
        #[arg(long, value_parser = complex_arg)]
        w: Complex64,
        /// Branch pairs for exp (linearizers use --depth bands)
        #[arg(long, default_value = "100000", value_parser = count_arg)]
        terms: u64,
        /// Leave out preimages with |z| below this radius
        #[arg(long, default_value = "0", value_parser = real_arg)]
        skip_below: f64,
    },
    /// Truncated sum against 1/(w^3 - 2w^2 + w)
    ExpIdentity {
        #[arg(long, value_parser = complex_arg)]
        w: Complex64,
        #[arg(long, default_value = "100000", value_parser = count_arg)]
        terms: u64,
    },
    /// Slope of log|sigma| against log|w| and the pole order at infinity
    PoleFit {
        #[command(flatten)]
        q: QdArgs,
        #[arg(long, default_value = "1e2,1e3,1e4,1e5,1e6", value_parser = list_arg)]
        moduli: RealList,
        #[arg(long, default_value = "0.3", value_parser = real_arg)]
        angle: f64,
        /// Branch pairs per unit of |w|
        #[arg(long, default_value = "20", value_parser = real_arg)]
        terms_per_modulus: f64,
        /// Sample the closed form 1/(w^3 - 2w^2 + w) instead of the sum
        #[arg(long)]
        closed_form: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KindArg {
    EntireNonlinearity,
    MeromorphicSchwarzian,
    LogSingularityCount,
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Roots(_) => "roots",
        Command::FixedPoints(_) => "fixed-points",
        Command::CriticalOrbit { .. } => "critical-orbit",
        Command::Preimages { .. } => "preimages",
        Command::PoincareSeries { .. } => "poincare-series",
        Command::Linearize(LinearizeCommand::Coeffs(_)) => "linearize coeffs",
        Command::Linearize(LinearizeCommand::Eval { .. }) => "linearize eval",
        Command::Linearize(LinearizeCommand::Order(_)) | Command::Order(_) => "linearize order",
        Command::Linearize(LinearizeCommand::Preimages { .. }) => "linearize preimages",
        Command::Area(AreaCommand::Sum { .. }) => "area sum",
        Command::Area(AreaCommand::Mc { .. }) => "area mc",
        Command::Area(AreaCommand::ElGrowth { .. }) => "area el-growth",
        Command::Area(AreaCommand::Distance { .. }) => "area distance",
        Command::Area(AreaCommand::Siegel { .. }) => "area siegel",
        Command::Qd(QdCommand::Pushforward { .. }) => "qd pushforward",
        Command::Qd(QdCommand::ExpIdentity { .. }) => "qd exp-identity",
        Command::Qd(QdCommand::PoleFit { .. }) => "qd pole-fit",
        Command::SchwarzianOrder { .. } => "schwarzian-order",
    }
}

fn run(argv: Vec<String>) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let g = &cli.global;
    let flags = Overrides {
        seed: g.seed,
        depth: g.depth,
        samples: g.samples,
        tol: g.tol,
        output_format: g.format,
        output_path: g.output.clone(),
        threads: g.threads,
    };
    let cfg = match RunConfig::resolve(g.config.as_deref(), flags) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("linea: {e}");
            return e.exit_code();
        }
    };
    let name = command_name(&cli.command);

    let outcome = match cfg.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| commands::execute(&cli.command, &cfg)),
            Err(e) => Err(CliError::Usage(format!("cannot start thread pool: {e}"))),
        },
        None => commands::execute(&cli.command, &cfg),
    };

    let (report, table, mut code) = match outcome {
        Ok(out) => {
            let mut code = 0;
            if let Some(wanted) = g.require_verdict {
                if !out.diagnostics.verdict.is_some_and(|v| wanted.matches(v)) {
                    code = EXIT_NUMERICAL;
                }
            }
            let report = Report {
                command: name.to_string(),
                config: &cfg,
                result: out.result,
                diagnostics: out.diagnostics,
                error: None,
            };
            (report, Some(out.table), code)
        }
        Err(e) => {
            eprintln!("linea: {e}");
            let report = Report {
                command: name.to_string(),
                config: &cfg,
                result: serde_json::Value::Null,
                diagnostics: Diagnostics::default(),
                error: Some(ErrorInfo {
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                }),
            };
            // errors are always reported as JSON
            (report, None, e.exit_code())
        }
    };
    match output::render(&report, table.as_ref(), cfg.output_format).and_then(|b| output::emit(&b, &cfg)) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("linea: {e}");
            code = code.max(EXIT_NUMERICAL);
        }
    }
    code
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args().collect()))
}
