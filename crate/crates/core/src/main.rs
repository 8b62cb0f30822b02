use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::error;

use quiver_capacity::commands::{self, Command, Flags, Verdict};
use quiver_capacity::oracle::OracleConfig;
use quiver_capacity::quiver::DimVector;
use quiver_capacity::scaling::ScalingConfig;
use quiver_capacity::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_COMPUTATION: u8 = 2;
const EXIT_INDETERMINATE: u8 = 3;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "quivercap", version)]
#[command(about = "Capacities and Brascamp-Lieb constants of quiver data by operator scaling")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Stop once the doubly-stochastic distance falls below this.
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol_ds: f64,

    /// Maximum number of scaling rounds.
    #[arg(long, global = true, default_value_t = 100_000)]
    max_iter: usize,

    /// Distance above which an exhausted run is declared capacity zero
    /// [default: 1/(N(N+1))].
    #[arg(long, global = true)]
    positivity_threshold: Option<f64>,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Largest N accepted by the brute-force oracle.
    #[arg(long, global = true, default_value_t = 16)]
    oracle_cap: usize,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check a datum file and list violated invariants
    Validate { file: PathBuf },
    /// Capacity by operator scaling
    Capacity { file: PathBuf },
    /// Brascamp-Lieb constant of an exponent datum
    Bl { file: PathBuf },
    /// Scaling run with the final group element and distance trace
    Scale { file: PathBuf },
    /// Semi-stability decision with a witness when negative
    Semistable { file: PathBuf },
    /// Gaussian extremisers from a converged scaling run
    Extremisers { file: PathBuf },
    /// Compare D(V) with D(V1)·D(V2) for a block upper-triangular datum
    Factorize {
        file: PathBuf,
        /// Dimensions of the first block, e.g. `v1=1,w1=1`; unlisted vertices get 0.
        #[arg(long, value_parser = parse_block_dims)]
        block_dims: DimVector,
    },
    /// Brute-force capacity by direct log-det minimization (small N only)
    Oracle { file: PathBuf },
    /// Run the acceptance checks on built-in instances
    Selftest,
}

fn parse_block_dims(s: &str) -> Result<DimVector, String> {
    let mut dims = DimVector::default();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (id, d) = item
            .split_once('=')
            .ok_or_else(|| format!("expected vertex=dim, got {item:?}"))?;
        let d: usize = d.trim().parse().map_err(|e| format!("{item:?}: {e}"))?;
        dims.0.insert(id.trim().to_owned(), d);
    }
    Ok(dims)
}

impl Cmd {
    fn split(self) -> (Command, Option<PathBuf>, Option<DimVector>) {
        match self {
            Cmd::Validate { file } => (Command::Validate, Some(file), None),
            Cmd::Capacity { file } => (Command::Capacity, Some(file), None),
            Cmd::Bl { file } => (Command::Bl, Some(file), None),
            Cmd::Scale { file } => (Command::Scale, Some(file), None),
            Cmd::Semistable { file } => (Command::Semistable, Some(file), None),
            Cmd::Extremisers { file } => (Command::Extremisers, Some(file), None),
            Cmd::Factorize { file, block_dims } => (Command::Factorize, Some(file), Some(block_dims)),
            Cmd::Oracle { file } => (Command::Oracle, Some(file), None),
            Cmd::Selftest => (Command::Selftest, None, None),
        }
    }
}

/// Bad input (arguments, unreadable or invalid files) is a usage error;
/// everything raised while computing is a computation error.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Io(_) | Error::Invalid(_) | Error::Exponents(_) | Error::Orthogonality { .. } => {
            EXIT_USAGE
        }
        _ => EXIT_COMPUTATION,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, file, block_dims) = cli.command.split();
    let flags = Flags {
        scaling: ScalingConfig {
            tol_ds: cli.tol_ds,
            max_iter: cli.max_iter,
            positivity_threshold: cli.positivity_threshold,
            seed: cli.seed,
            ..Default::default()
        },
        oracle: OracleConfig {
            cap: cli.oracle_cap,
            seed: cli.seed,
            ..Default::default()
        },
        block_dims,
    };

    let datum = match file.as_deref().map(commands::load).transpose() {
        Ok(d) => d,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let outcome = match commands::dispatch(command, datum.as_ref(), &flags) {
        Ok(o) => o,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let rendered = match cli.format {
        Format::Json => commands::render_json(&outcome.report),
        Format::Text => commands::render_text(&outcome.report),
    };
    print!("{rendered}");
    match outcome.verdict {
        Verdict::Success => ExitCode::SUCCESS,
        Verdict::Indeterminate => ExitCode::from(EXIT_INDETERMINATE),
        Verdict::Failure if command == Command::Validate => ExitCode::from(EXIT_USAGE),
        Verdict::Failure => ExitCode::from(EXIT_COMPUTATION),
    }
}
