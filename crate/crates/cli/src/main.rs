use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod suites;

/// Approximate L²-invariants of group-ring matrices and chain complexes.
#[derive(Parser, Debug)]
#[command(name = "l2approx", version)]
struct Cli {
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for level and grid parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Relative kernel threshold: eigenvalues ≤ eps_ker·K count as zero.
    #[arg(long, global = true)]
    eps_ker: Option<f64>,
    /// Tolerance for limit-versus-oracle comparisons.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Torus quadrature points per coordinate.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectral density of one level (CSV, or JSON when --output ends in .json).
    Density {
        problem: PathBuf,
        /// Tower moduli; the deepest one is reported.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<u64>>,
        /// Følner box radii; the largest one is reported.
        #[arg(long, value_delimiter = ',')]
        boxes: Option<Vec<u64>>,
    },
    /// Run a scheme and its checks; prints a JSON run report.
    Approx {
        problem: PathBuf,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',')]
        boxes: Option<Vec<u64>>,
        /// Points at which the squeeze inequalities are checked.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda_grid: Option<Vec<f64>>,
    },
    /// L²-invariants of a chain complex; prints a JSON report.
    Cw {
        complex: PathBuf,
        /// Use a tower with these moduli per coordinate instead of the oracle.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<u64>>,
    },
    /// Run a bundled property suite.
    Verify { suite: Suite },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Traces,
    Squeeze,
    Determinant,
    Whitehead,
    Subgroup,
}

/// Options shared by every command.
#[derive(Clone, Debug)]
pub struct Global {
    pub output: Option<PathBuf>,
    pub eps_ker: Option<f64>,
    pub tol: Option<f64>,
    pub grid: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("{0}")]
    Compute(#[from] l2approx_core::Error),
    #[error("property check failed")]
    Failed,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed => 1,
            CliError::Input(_) => 2,
            CliError::Compute(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let global = Global {
        output: cli.output,
        eps_ker: cli.eps_ker,
        tol: cli.tol,
        grid: cli.grid,
    };
    let result = match cli.command {
        Command::Density {
            problem,
            levels,
            boxes,
        } => commands::density(&global, &problem, levels, boxes),
        Command::Approx {
            problem,
            levels,
            boxes,
            lambda_grid,
        } => commands::approx(&global, &problem, levels, boxes, lambda_grid),
        Command::Cw { complex, levels } => commands::cw(&global, &complex, levels),
        Command::Verify { suite } => suites::verify(&global, suite),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::Failed) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
