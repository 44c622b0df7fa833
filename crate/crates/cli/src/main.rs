mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<steane_ft::Error> for CliError {
    fn from(e: steane_ft::Error) -> Self {
        use steane_ft::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidInput(_) | E::Parse(_) => CliError::Usage(msg),
            E::Csv(ref c) if !c.is_io_error() => CliError::Usage(msg),
            E::Csv(_) | E::Io(_) => CliError::Io(msg),
            E::Numerical(_) | E::AncillaRejectionCap { .. } | E::QubitOutOfRange { .. } => {
                CliError::Numerical(msg)
            }
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "steane-ft",
    version,
    about = "Monte Carlo simulator for fault-tolerant Steane-code recovery"
)]
pub struct Cli {
    /// File of `key=value` lines; flags take precedence over it.
    #[arg(long, global = true, env = "STEANE_FT_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, global = true, env = "STEANE_FT_THREADS")]
    threads: Option<usize>,
    /// Removes the verification CNOT from both ancilla preparations.
    #[arg(long, global = true, hide = true)]
    drop_verification_cnot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Runs the structural checks.
    Selftest,
    /// Logical failure rates over a grid of (C, ε).
    Sweep(ExperimentArgs),
    /// Fidelity after each of t recoveries.
    Stabilize(ExperimentArgs),
    /// Class rates and F(a) for a noisily encoded state.
    Fig5(ExperimentArgs),
    /// Fits a sweep, stabilize or line-fit file.
    Fit(FitArgs),
    /// Threshold estimates from fits or from the reference table.
    Thresholds(ThresholdArgs),
    /// Reference table with recomputed G1.
    Table1(OutArgs),
    /// Code words, syndromes and coset leaders.
    DumpTables(OutArgs),
    /// The compiled recovery network.
    DumpNetwork(OutArgs),
}

#[derive(Args, Debug, Default)]
struct ExperimentArgs {
    /// memory_t20, ec1, zgate or fig5 (sweep only).
    #[arg(long, env = "STEANE_FT_MODE")]
    mode: Option<String>,
    /// Ratio C = ε/γ; `inf` means noiseless gates. Repeatable.
    #[arg(long = "C", env = "STEANE_FT_C", value_delimiter = ',')]
    c: Vec<String>,
    /// Memory error rate. Repeatable.
    #[arg(long, env = "STEANE_FT_EPSILON", value_delimiter = ',')]
    epsilon: Vec<String>,
    /// Log-spaced grid `lo:hi:count`, used when no --epsilon is given.
    #[arg(long, env = "STEANE_FT_EPSILON_GRID")]
    epsilon_grid: Option<String>,
    #[arg(long, env = "STEANE_FT_TRIALS")]
    trials: Option<u64>,
    #[arg(long, env = "STEANE_FT_SEED")]
    seed: Option<u64>,
    /// Recoveries per stabilize trial.
    #[arg(long, env = "STEANE_FT_T_MAX")]
    t_max: Option<usize>,
    /// Number of points on the amplitude grid (fig5).
    #[arg(long, env = "STEANE_FT_A_COUNT")]
    a_count: Option<usize>,
    #[arg(long, env = "STEANE_FT_ENCODER_NOISY")]
    encoder_noisy: Option<bool>,
    #[arg(long, env = "STEANE_FT_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// quadratic, linear, free_quadratic, line, slope_poly2 or slope_poly3.
    #[arg(long, default_value = "quadratic")]
    model: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    /// Output of `fit`. Repeatable.
    #[arg(
        long,
        conflicts_with = "use_reference_table",
        required_unless_present = "use_reference_table"
    )]
    fits: Vec<PathBuf>,
    /// Uses the built-in reference table instead of fits.
    #[arg(long, alias = "use-paper-table")]
    use_reference_table: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OutArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
