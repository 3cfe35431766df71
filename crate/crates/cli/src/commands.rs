//! The experiment commands: closed-form theory tables, oracle
//! validation, strategy sweeps, budget dynamics, and the
//! prior-leak impossibility demonstration. Every command writes CSV
//! deterministically for a fixed (scenario, seed).

use crate::scenario::{Scenario, ScenarioError};
use fairaudit_core::audit::fmt_f64;
use fairaudit_core::derive_seed;
use fairaudit_core::geometry::{
    detection_rate, detection_rate_lower_bound, detection_rate_printed, lower_bound_extremum,
    monte_carlo_detection_rate, quadrature_detection_rate, GeometryError, GeometryParams,
};
use fairaudit_core::protocol::{
    calibrate_tau, evaluate_strategy_point, fmt_hyperparams, run_trial, write_trial_records,
    AuditTrialRecord, ProtocolError, CALIBRATION_HOLDOUT_N, CALIBRATION_K,
};
use fairaudit_core::strategies::{PlatformStrategy, StrategyError};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("invalid argument {name}: {reason}")]
    InvalidArg { name: &'static str, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("malformed {file} line {line}: {message}")]
    CsvParse {
        file: &'static str,
        line: usize,
        message: String,
    },
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, content).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn fmt_opt_bool(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}

fn parse_field<T: FromStr>(s: &str, file: &'static str, line: usize) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| CliError::CsvParse {
        file,
        line,
        message: format!("{:?}: {}", s, e),
    })
}

fn parse_opt<T: FromStr>(s: &str, file: &'static str, line: usize) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    if s.is_empty() {
        Ok(None)
    } else {
        parse_field(s, file, line).map(Some)
    }
}

fn split_csv_line<'a>(
    line: &'a str,
    expected: usize,
    file: &'static str,
    lineno: usize,
) -> Result<Vec<&'a str>, CliError> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != expected {
        return Err(CliError::CsvParse {
            file,
            line: lineno,
            message: format!("expected {} fields, got {}", expected, fields.len()),
        });
    }
    Ok(fields)
}

fn data_lines<'a>(
    text: &'a str,
    header: &'static str,
    file: &'static str,
) -> Result<impl Iterator<Item = (usize, &'a str)>, CliError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == header => {}
        other => {
            return Err(CliError::CsvParse {
                file,
                line: 1,
                message: format!("expected header {:?}, got {:?}", header, other.map(|o| o.1)),
            })
        }
    }
    Ok(lines.filter(|(_, l)| !l.trim().is_empty()))
}

// --- theory ----------------------------------------------------------

pub const THEORY_HEADER: &str = "n,x,p_uf_decomposition,p_uf_printed,lower_bound,gamma";

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryRow {
    pub n: usize,
    pub x: f64,
    pub p_uf_decomposition: f64,
    pub p_uf_printed: f64,
    /// Stated for even dimensions only; empty in the CSV otherwise.
    pub lower_bound: Option<f64>,
    pub gamma: f64,
}

fn check_grid(n_list: &[usize], x_grid: &[f64]) -> Result<(), CliError> {
    if n_list.is_empty() || n_list.iter().any(|&n| n < 2) {
        return Err(CliError::InvalidArg {
            name: "n_list",
            reason: "must be non-empty with every n >= 2".into(),
        });
    }
    if x_grid.is_empty() || x_grid.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(CliError::InvalidArg {
            name: "x_grid",
            reason: "must be non-empty with every x in [0, 1]".into(),
        });
    }
    Ok(())
}

/// Closed-form detection probabilities over an (n, delta/tau) grid:
/// the decomposition-based rate, the printed closed form kept for
/// comparison, the even-dimension lower bound, and its interior
/// stationary point gamma.
pub fn cmd_theory(
    n_list: &[usize],
    x_grid: &[f64],
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    check_grid(n_list, x_grid)?;
    let mut rows = Vec::new();
    for &n in n_list {
        for &x in x_grid {
            let g = GeometryParams::new(n, 1.0, x)?;
            rows.push(TheoryRow {
                n,
                x,
                p_uf_decomposition: detection_rate(&g)?,
                p_uf_printed: detection_rate_printed(&g)?,
                lower_bound: if n % 2 == 0 {
                    Some(detection_rate_lower_bound(&g)?)
                } else {
                    None
                },
                gamma: lower_bound_extremum(n),
            });
        }
    }
    let mut text = String::from(THEORY_HEADER);
    text.push('\n');
    for r in &rows {
        writeln!(
            text,
            "{},{},{},{},{},{}",
            r.n,
            fmt_f64(r.x),
            fmt_f64(r.p_uf_decomposition),
            fmt_f64(r.p_uf_printed),
            fmt_opt(r.lower_bound),
            fmt_f64(r.gamma),
        )
        .unwrap();
    }
    let path = out.join("theory.csv");
    write_file(&path, &text)?;
    Ok(vec![path])
}

pub fn read_theory_csv(text: &str) -> Result<Vec<TheoryRow>, CliError> {
    let mut rows = Vec::new();
    for (idx, line) in data_lines(text, THEORY_HEADER, "theory.csv")? {
        let lineno = idx + 1;
        let f = split_csv_line(line, 6, "theory.csv", lineno)?;
        rows.push(TheoryRow {
            n: parse_field(f[0], "theory.csv", lineno)?,
            x: parse_field(f[1], "theory.csv", lineno)?,
            p_uf_decomposition: parse_field(f[2], "theory.csv", lineno)?,
            p_uf_printed: parse_field(f[3], "theory.csv", lineno)?,
            lower_bound: parse_opt(f[4], "theory.csv", lineno)?,
            gamma: parse_field(f[5], "theory.csv", lineno)?,
        });
    }
    Ok(rows)
}

// --- validate --------------------------------------------------------

pub const VALIDATE_HEADER: &str = "n,x,closed_form,quadrature,mc,mc_stderr,printed,\
agree_quadrature,agree_mc,printed_divergent";

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateRow {
    pub n: usize,
    pub x: f64,
    pub closed_form: f64,
    pub quadrature: f64,
    pub mc: f64,
    pub mc_stderr: f64,
    pub printed: f64,
    pub agree_quadrature: bool,
    pub agree_mc: bool,
    pub printed_divergent: bool,
}

pub const QUADRATURE_TOLERANCE: f64 = 1e-6;
pub const MC_SIGMA_FACTOR: f64 = 4.0;
// the two closed forms differ by 2x(1 - x^2)^((n-1)/2) / W_n, which
// shrinks below the oracle tolerance for large n near x = 1, so the
// divergence flag gets its own tighter threshold
pub const PRINTED_TOLERANCE: f64 = 1e-9;

/// Cross-checks the closed-form detection rate against the quadrature
/// and Monte Carlo oracles on a grid. Returns the written files and
/// whether any oracle disagreed with the closed form (exit status 2).
pub fn cmd_validate(
    n_list: &[usize],
    x_grid: &[f64],
    samples: usize,
    seed: u64,
    out: &Path,
) -> Result<(Vec<PathBuf>, bool), CliError> {
    check_grid(n_list, x_grid)?;
    if samples < 10_000 {
        return Err(CliError::InvalidArg {
            name: "samples",
            reason: format!("must be >= 10000, got {}", samples),
        });
    }
    let mut rows = Vec::new();
    for &n in n_list {
        for &x in x_grid {
            let g = GeometryParams::new(n, 1.0, x)?;
            let closed_form = detection_rate(&g)?;
            let quadrature = quadrature_detection_rate(&g)?;
            let (mc, mc_stderr) =
                monte_carlo_detection_rate(&g, samples, derive_seed(seed, rows.len() as u64))?;
            let printed = detection_rate_printed(&g)?;
            rows.push(ValidateRow {
                n,
                x,
                closed_form,
                quadrature,
                mc,
                mc_stderr,
                printed,
                agree_quadrature: (closed_form - quadrature).abs() <= QUADRATURE_TOLERANCE,
                // the 3/samples floor keeps the check meaningful when
                // every draw lands on one side and the stderr collapses
                agree_mc: (closed_form - mc).abs()
                    <= MC_SIGMA_FACTOR * mc_stderr + 3.0 / samples as f64,
                printed_divergent: (printed - closed_form).abs() > PRINTED_TOLERANCE,
            });
        }
    }
    let disagreement = rows.iter().any(|r| !r.agree_quadrature || !r.agree_mc);
    let mut text = String::from(VALIDATE_HEADER);
    text.push('\n');
    for r in &rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{}",
            r.n,
            fmt_f64(r.x),
            fmt_f64(r.closed_form),
            fmt_f64(r.quadrature),
            fmt_f64(r.mc),
            fmt_f64(r.mc_stderr),
            fmt_f64(r.printed),
            r.agree_quadrature,
            r.agree_mc,
            r.printed_divergent,
        )
        .unwrap();
    }
    let path = out.join("validate.csv");
    write_file(&path, &text)?;
    Ok((vec![path], disagreement))
}

pub fn read_validate_csv(text: &str) -> Result<Vec<ValidateRow>, CliError> {
    let mut rows = Vec::new();
    for (idx, line) in data_lines(text, VALIDATE_HEADER, "validate.csv")? {
        let lineno = idx + 1;
        let f = split_csv_line(line, 10, "validate.csv", lineno)?;
        rows.push(ValidateRow {
            n: parse_field(f[0], "validate.csv", lineno)?,
            x: parse_field(f[1], "validate.csv", lineno)?,
            closed_form: parse_field(f[2], "validate.csv", lineno)?,
            quadrature: parse_field(f[3], "validate.csv", lineno)?,
            mc: parse_field(f[4], "validate.csv", lineno)?,
            mc_stderr: parse_field(f[5], "validate.csv", lineno)?,
            printed: parse_field(f[6], "validate.csv", lineno)?,
            agree_quadrature: parse_field(f[7], "validate.csv", lineno)?,
            agree_mc: parse_field(f[8], "validate.csv", lineno)?,
            printed_divergent: parse_field(f[9], "validate.csv", lineno)?,
        });
    }
    Ok(rows)
}

// --- shared simulation plumbing --------------------------------------

const SALT_CALIBRATION: u64 = 0xCA11;
const SALT_BUDGET_BASE: u64 = 0xB000;
const SALT_IMPOSSIBILITY: u64 = 0x1350;

fn scenario_tau(scenario: &Scenario) -> Result<f64, CliError> {
    match scenario.tau_override {
        Some(tau) => Ok(tau),
        None => Ok(calibrate_tau(
            &scenario.task,
            CALIBRATION_K,
            CALIBRATION_HOLDOUT_N,
            derive_seed(scenario.seed, SALT_CALIBRATION),
        )?),
    }
}

// --- sweep -----------------------------------------------------------

pub const SWEEP_HEADER: &str = "budget,strategy,hyperparams,trials,tau,mean_detection,\
sd_detection,mean_concealed,sd_concealed,mean_flips,mean_abs_dp_honest";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub budget: usize,
    pub strategy: String,
    pub hyperparams: String,
    pub trials: usize,
    pub tau: f64,
    pub mean_detection: f64,
    pub sd_detection: f64,
    pub mean_concealed: f64,
    pub sd_concealed: f64,
    pub mean_flips: f64,
    pub mean_abs_dp_honest: f64,
}

/// Mean detection score against mean concealed unfairness for every
/// (budget, strategy point) of the scenario; the raw trial records go
/// to a companion file. Strategy points at the same budget share trial
/// seeds, so they face identical platforms and audit batches.
pub fn cmd_sweep(scenario: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let tau = scenario_tau(scenario)?;
    let mut rows = Vec::new();
    let mut all_records: Vec<AuditTrialRecord> = Vec::new();
    for (b_idx, &budget) in scenario.budgets.iter().enumerate() {
        let point_seed = derive_seed(scenario.seed, SALT_BUDGET_BASE + b_idx as u64);
        for strategy in &scenario.strategies {
            let (stats, records) = evaluate_strategy_point(
                strategy,
                &scenario.task,
                budget,
                tau,
                scenario.epsilon_fair,
                scenario.trials,
                point_seed,
            )?;
            rows.push(SweepRow {
                budget,
                strategy: strategy.id().to_string(),
                hyperparams: fmt_hyperparams(&strategy.hyperparams()),
                trials: stats.trials,
                tau,
                mean_detection: stats.mean_detection,
                sd_detection: stats.sd_detection,
                mean_concealed: stats.mean_concealed,
                sd_concealed: stats.sd_concealed,
                mean_flips: stats.mean_flips,
                mean_abs_dp_honest: stats.mean_dp_honest_abs,
            });
            all_records.extend(records);
        }
    }
    let mut text = String::from(SWEEP_HEADER);
    text.push('\n');
    for r in &rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.budget,
            r.strategy,
            r.hyperparams,
            r.trials,
            fmt_f64(r.tau),
            fmt_f64(r.mean_detection),
            fmt_f64(r.sd_detection),
            fmt_f64(r.mean_concealed),
            fmt_f64(r.sd_concealed),
            fmt_f64(r.mean_flips),
            fmt_f64(r.mean_abs_dp_honest),
        )
        .unwrap();
    }
    let sweep_path = out.join("sweep.csv");
    write_file(&sweep_path, &text)?;
    let mut trials_bytes = Vec::new();
    write_trial_records(&all_records, &mut trials_bytes)
        .map_err(ProtocolError::from)?;
    let trials_path = out.join("sweep_trials.csv");
    write_file(&trials_path, std::str::from_utf8(&trials_bytes).unwrap())?;
    Ok(vec![sweep_path, trials_path])
}

pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepRow>, CliError> {
    let mut rows = Vec::new();
    for (idx, line) in data_lines(text, SWEEP_HEADER, "sweep.csv")? {
        let lineno = idx + 1;
        let f = split_csv_line(line, 11, "sweep.csv", lineno)?;
        rows.push(SweepRow {
            budget: parse_field(f[0], "sweep.csv", lineno)?,
            strategy: f[1].to_string(),
            hyperparams: f[2].to_string(),
            trials: parse_field(f[3], "sweep.csv", lineno)?,
            tau: parse_field(f[4], "sweep.csv", lineno)?,
            mean_detection: parse_field(f[5], "sweep.csv", lineno)?,
            sd_detection: parse_field(f[6], "sweep.csv", lineno)?,
            mean_concealed: parse_field(f[7], "sweep.csv", lineno)?,
            sd_concealed: parse_field(f[8], "sweep.csv", lineno)?,
            mean_flips: parse_field(f[9], "sweep.csv", lineno)?,
            mean_abs_dp_honest: parse_field(f[10], "sweep.csv", lineno)?,
        });
    }
    Ok(rows)
}

// --- budget ----------------------------------------------------------

pub const BUDGET_HEADER: &str =
    "budget,strategy,hyperparams,trials,tau,mean_detection,mean_concealed,passes";
pub const BUDGET_SUMMARY_HEADER: &str = "budget,max_concealable";

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetRow {
    pub budget: usize,
    pub strategy: String,
    pub hyperparams: String,
    pub trials: usize,
    pub tau: f64,
    pub mean_detection: f64,
    pub mean_concealed: f64,
    /// Whether the point's mean detection stays within tau.
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSummaryRow {
    pub budget: usize,
    pub max_concealable: f64,
}

/// Concealable unfairness as the audit budget grows: per budget and
/// strategy point the mean concealed unfairness and whether mean
/// detection stays within the calibrated threshold, plus a summary with
/// the per-budget maximum over passing points.
pub fn cmd_budget(
    scenario: &Scenario,
    out: &Path,
    render: bool,
) -> Result<Vec<PathBuf>, CliError> {
    if scenario.budgets.len() < 3 {
        return Err(CliError::Scenario(ScenarioError::Invalid {
            field: "budgets",
            message: "budget dynamics need at least 3 budgets".into(),
        }));
    }
    let tau = scenario_tau(scenario)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (b_idx, &budget) in scenario.budgets.iter().enumerate() {
        let point_seed = derive_seed(scenario.seed, SALT_BUDGET_BASE + b_idx as u64);
        let mut max_concealable = 0.0f64;
        for strategy in &scenario.strategies {
            let (stats, _) = evaluate_strategy_point(
                strategy,
                &scenario.task,
                budget,
                tau,
                scenario.epsilon_fair,
                scenario.trials,
                point_seed,
            )?;
            let passes = stats.mean_detection <= tau + 1e-12;
            if passes {
                max_concealable = max_concealable.max(stats.mean_concealed);
            }
            rows.push(BudgetRow {
                budget,
                strategy: strategy.id().to_string(),
                hyperparams: fmt_hyperparams(&strategy.hyperparams()),
                trials: stats.trials,
                tau,
                mean_detection: stats.mean_detection,
                mean_concealed: stats.mean_concealed,
                passes,
            });
        }
        summary.push(BudgetSummaryRow {
            budget,
            max_concealable,
        });
    }
    let mut text = String::from(BUDGET_HEADER);
    text.push('\n');
    for r in &rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            r.budget,
            r.strategy,
            r.hyperparams,
            r.trials,
            fmt_f64(r.tau),
            fmt_f64(r.mean_detection),
            fmt_f64(r.mean_concealed),
            r.passes,
        )
        .unwrap();
    }
    let budget_path = out.join("budget.csv");
    write_file(&budget_path, &text)?;
    let mut summary_text = String::from(BUDGET_SUMMARY_HEADER);
    summary_text.push('\n');
    for r in &summary {
        writeln!(summary_text, "{},{}", r.budget, fmt_f64(r.max_concealable)).unwrap();
    }
    let summary_path = out.join("budget_summary.csv");
    write_file(&summary_path, &summary_text)?;
    let mut paths = vec![budget_path, summary_path];
    if render {
        let plot_path = out.join("budget_plot.txt");
        write_file(&plot_path, &render_budget_plot(&summary))?;
        paths.push(plot_path);
    }
    Ok(paths)
}

/// Crude fixed-width bar chart of max concealable unfairness per
/// budget, for a quick look without a plotting tool.
fn render_budget_plot(summary: &[BudgetSummaryRow]) -> String {
    let max = summary
        .iter()
        .map(|r| r.max_concealable)
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let mut text = String::from("budget  max_concealable\n");
    for r in summary {
        let bars = ((r.max_concealable / max) * 50.0).round() as usize;
        writeln!(
            text,
            "{:>6}  {:>8.4} |{}",
            r.budget,
            r.max_concealable,
            "#".repeat(bars)
        )
        .unwrap();
    }
    text
}

pub fn read_budget_csv(text: &str) -> Result<Vec<BudgetRow>, CliError> {
    let mut rows = Vec::new();
    for (idx, line) in data_lines(text, BUDGET_HEADER, "budget.csv")? {
        let lineno = idx + 1;
        let f = split_csv_line(line, 8, "budget.csv", lineno)?;
        rows.push(BudgetRow {
            budget: parse_field(f[0], "budget.csv", lineno)?,
            strategy: f[1].to_string(),
            hyperparams: f[2].to_string(),
            trials: parse_field(f[3], "budget.csv", lineno)?,
            tau: parse_field(f[4], "budget.csv", lineno)?,
            mean_detection: parse_field(f[5], "budget.csv", lineno)?,
            mean_concealed: parse_field(f[6], "budget.csv", lineno)?,
            passes: parse_field(f[7], "budget.csv", lineno)?,
        });
    }
    Ok(rows)
}

pub fn read_budget_summary_csv(text: &str) -> Result<Vec<BudgetSummaryRow>, CliError> {
    let mut rows = Vec::new();
    for (idx, line) in data_lines(text, BUDGET_SUMMARY_HEADER, "budget_summary.csv")? {
        let lineno = idx + 1;
        let f = split_csv_line(line, 2, "budget_summary.csv", lineno)?;
        rows.push(BudgetSummaryRow {
            budget: parse_field(f[0], "budget_summary.csv", lineno)?,
            max_concealable: parse_field(f[1], "budget_summary.csv", lineno)?,
        });
    }
    Ok(rows)
}

// --- impossibility ---------------------------------------------------

pub const IMPOSSIBILITY_HEADER: &str =
    "trial,seed,feasible,detection,concealed,fair,honest";
pub const IMPOSSIBILITY_SUMMARY_HEADER: &str =
    "trials,feasible_trials,detections,mean_concealed";

#[derive(Debug, Clone, PartialEq)]
pub struct ImpossibilityRow {
    pub trial: usize,
    pub seed: u64,
    pub feasible: bool,
    pub detection: Option<f64>,
    pub concealed: Option<f64>,
    pub fair: Option<bool>,
    pub honest: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpossibilitySummary {
    pub trials: usize,
    pub feasible_trials: usize,
    pub detections: usize,
    pub mean_concealed: Option<f64>,
}

/// Runs the prior-aware attack at the scenario's largest budget. When
/// a fair expectable model exists on the drawn audit set, the attack is
/// guaranteed to pass both verdict tests; infeasible draws are reported
/// per trial rather than failing the run.
pub fn cmd_impossibility(scenario: &Scenario, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let tau = scenario_tau(scenario)?;
    let budget = *scenario.budgets.last().unwrap();
    let mut rows = Vec::new();
    let mut detections = 0;
    let mut concealed_sum = 0.0;
    let mut feasible_trials = 0;
    for trial in 0..scenario.trials {
        let trial_seed = derive_seed(scenario.seed, SALT_IMPOSSIBILITY + trial as u64);
        match run_trial(
            &PlatformStrategy::PriorAware,
            &scenario.task,
            budget,
            tau,
            scenario.epsilon_fair,
            trial_seed,
        ) {
            Ok(record) => {
                feasible_trials += 1;
                if !record.verdict.honest {
                    detections += 1;
                }
                concealed_sum += record.concealed;
                rows.push(ImpossibilityRow {
                    trial,
                    seed: trial_seed,
                    feasible: true,
                    detection: Some(record.verdict.measured_detection),
                    concealed: Some(record.concealed),
                    fair: Some(record.verdict.fair),
                    honest: Some(record.verdict.honest),
                });
            }
            Err(ProtocolError::Strategy(StrategyError::AxiomViolation(_))) => {
                rows.push(ImpossibilityRow {
                    trial,
                    seed: trial_seed,
                    feasible: false,
                    detection: None,
                    concealed: None,
                    fair: None,
                    honest: None,
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    let summary = ImpossibilitySummary {
        trials: scenario.trials,
        feasible_trials,
        detections,
        mean_concealed: (feasible_trials > 0)
            .then(|| concealed_sum / feasible_trials as f64),
    };
    let mut text = String::from(IMPOSSIBILITY_HEADER);
    text.push('\n');
    for r in &rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{}",
            r.trial,
            r.seed,
            r.feasible,
            fmt_opt(r.detection),
            fmt_opt(r.concealed),
            fmt_opt_bool(r.fair),
            fmt_opt_bool(r.honest),
        )
        .unwrap();
    }
    let rows_path = out.join("impossibility.csv");
    write_file(&rows_path, &text)?;
    let mut summary_text = String::from(IMPOSSIBILITY_SUMMARY_HEADER);
    summary_text.push('\n');
    writeln!(
        summary_text,
        "{},{},{},{}",
        summary.trials,
        summary.feasible_trials,
        summary.detections,
        fmt_opt(summary.mean_concealed),
    )
    .unwrap();
    let summary_path = out.join("impossibility_summary.csv");
    write_file(&summary_path, &summary_text)?;
    Ok(vec![rows_path, summary_path])
}

pub fn read_impossibility_csv(text: &str) -> Result<Vec<ImpossibilityRow>, CliError> {
    let mut rows = Vec::new();
    for (idx, line) in data_lines(text, IMPOSSIBILITY_HEADER, "impossibility.csv")? {
        let lineno = idx + 1;
        let f = split_csv_line(line, 7, "impossibility.csv", lineno)?;
        rows.push(ImpossibilityRow {
            trial: parse_field(f[0], "impossibility.csv", lineno)?,
            seed: parse_field(f[1], "impossibility.csv", lineno)?,
            feasible: parse_field(f[2], "impossibility.csv", lineno)?,
            detection: parse_opt(f[3], "impossibility.csv", lineno)?,
            concealed: parse_opt(f[4], "impossibility.csv", lineno)?,
            fair: parse_opt(f[5], "impossibility.csv", lineno)?,
            honest: parse_opt(f[6], "impossibility.csv", lineno)?,
        });
    }
    Ok(rows)
}

pub fn read_impossibility_summary_csv(text: &str) -> Result<ImpossibilitySummary, CliError> {
    let file = "impossibility_summary.csv";
    let mut rows = data_lines(text, IMPOSSIBILITY_SUMMARY_HEADER, file)?;
    let (idx, line) = rows.next().ok_or(CliError::CsvParse {
        file,
        line: 2,
        message: "missing summary row".into(),
    })?;
    let lineno = idx + 1;
    let f = split_csv_line(line, 4, file, lineno)?;
    Ok(ImpossibilitySummary {
        trials: parse_field(f[0], file, lineno)?,
        feasible_trials: parse_field(f[1], file, lineno)?,
        detections: parse_field(f[2], file, lineno)?,
        mean_concealed: parse_opt(f[3], file, lineno)?,
    })
}
