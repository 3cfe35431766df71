//! Command-line experiment runner for the fairness-audit simulator.
//! Subcommands: `theory` (closed-form tables), `validate` (oracle
//! cross-checks; exits 2 on disagreement), `sweep` (strategy grid,
//! detection vs concealment), `budget` (concealable unfairness vs
//! audit budget), `impossibility` (prior-leak attack). Exit codes:
//! 0 success, 1 validation failure, 2 oracle disagreement.

pub mod commands;
pub mod scenario;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use commands::CliError;
use scenario::{parse_scenario, Scenario};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "fairaudit", version, about = "Fairness-audit manipulation simulator")]
struct Cli {
    /// Suppress per-file progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

const DEFAULT_N_LIST: &str = "2,3,4,5,10,20";
const DEFAULT_X_GRID: &str = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1";

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the closed-form detection-rate table over an (n, x) grid.
    Theory {
        #[arg(long, default_value = DEFAULT_N_LIST, value_name = "N,N,..")]
        n_list: String,
        #[arg(long, default_value = DEFAULT_X_GRID, value_name = "X,X,..")]
        x_grid: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Cross-check the closed form against quadrature and Monte Carlo.
    Validate {
        #[arg(long, default_value = DEFAULT_N_LIST, value_name = "N,N,..")]
        n_list: String,
        #[arg(long, default_value = DEFAULT_X_GRID, value_name = "X,X,..")]
        x_grid: String,
        /// Monte Carlo samples per grid point (minimum 10000).
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Detection score vs concealed unfairness across a strategy grid.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Max concealable unfairness per audit budget.
    Budget {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a plain-text bar chart.
        #[arg(long)]
        render: bool,
    },
    /// Prior-leak attack trials (expected detection rate zero).
    Impossibility {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_usize_list(text: &str, name: &'static str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|v| {
            v.trim().parse().map_err(|e| CliError::InvalidArg {
                name,
                reason: format!("{:?}: {}", v.trim(), e),
            })
        })
        .collect()
}

fn parse_f64_list(text: &str, name: &'static str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| {
            v.trim().parse().map_err(|e| CliError::InvalidArg {
                name,
                reason: format!("{:?}: {}", v.trim(), e),
            })
        })
        .collect()
}

fn load_scenario(
    path: &Path,
    seed_override: Option<u64>,
) -> Result<Scenario, CliError> {
    let text = commands::read_file(path)?;
    let mut scenario = parse_scenario(&text)?;
    if let Some(seed) = seed_override {
        scenario.seed = seed;
    }
    Ok(scenario)
}

fn resolve_out(flag: Option<PathBuf>, scenario: &Scenario) -> PathBuf {
    flag.or_else(|| scenario.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn report(paths: &[PathBuf], quiet: bool) {
    if quiet {
        return;
    }
    for path in paths {
        println!("wrote {}", path.display());
    }
}

/// Runs the CLI; separated from `main` so integration tests can drive
/// it in-process.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    ExitCode::from(run_code(args))
}

/// Like [`run`] but returns the raw exit status: 0 success, 1
/// validation failure, 2 oracle disagreement.
pub fn run_code<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e);
            1
        }
    }
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Theory { n_list, x_grid, out } => {
            let paths = commands::cmd_theory(
                &parse_usize_list(&n_list, "n_list")?,
                &parse_f64_list(&x_grid, "x_grid")?,
                &out,
            )?;
            report(&paths, quiet);
            Ok(0)
        }
        Command::Validate {
            n_list,
            x_grid,
            samples,
            seed,
            out,
        } => {
            let (paths, disagreement) = commands::cmd_validate(
                &parse_usize_list(&n_list, "n_list")?,
                &parse_f64_list(&x_grid, "x_grid")?,
                samples,
                seed,
                &out,
            )?;
            report(&paths, quiet);
            if disagreement {
                if !quiet {
                    eprintln!("oracle disagreement detected; see report");
                }
                Ok(2)
            } else {
                Ok(0)
            }
        }
        Command::Sweep { scenario, seed, out } => {
            let scenario = load_scenario(&scenario, seed)?;
            let out = resolve_out(out, &scenario);
            let paths = commands::cmd_sweep(&scenario, &out)?;
            report(&paths, quiet);
            Ok(0)
        }
        Command::Budget {
            scenario,
            seed,
            out,
            render,
        } => {
            let scenario = load_scenario(&scenario, seed)?;
            let out = resolve_out(out, &scenario);
            let paths = commands::cmd_budget(&scenario, &out, render)?;
            report(&paths, quiet);
            Ok(0)
        }
        Command::Impossibility { scenario, seed, out } => {
            let scenario = load_scenario(&scenario, seed)?;
            let out = resolve_out(out, &scenario);
            let paths = commands::cmd_impossibility(&scenario, &out)?;
            report(&paths, quiet);
            Ok(0)
        }
    }
}
