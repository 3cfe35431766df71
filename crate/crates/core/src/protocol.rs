//! The three-step audit protocol: the auditor samples a batch from its
//! labeled pool, the platform answers under a chosen strategy, and the
//! auditor renders fairness and honesty verdicts. Also calibration of
//! the detection threshold and the trial-level aggregates (empirical
//! detection rate, maximum concealable unfairness).

use crate::audit::{
    detection_score, dp_estimate, fmt_f64, minimal_flips_to_fair, AuditError, AuditSet,
    DatasetPrior,
};
use crate::derive_seed;
use crate::strategies::{
    generate_task, honest_answers, train_score_model, PlatformStrategy, ScoreModel, StrategyError,
    SyntheticTask,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use thiserror::Error;

/// Sample count the platform trains on in simulated trials. Larger than
/// the calibration training sets so an honestly trained platform sits
/// below the calibrated detection threshold with margin.
pub const PLATFORM_TRAIN_N: usize = 4000;
/// Sample count for each threshold-calibration model. Deliberately
/// modest: the calibration models stand in for the state of the art an
/// outside auditor can field, which the platform's own training beats.
pub const CALIBRATION_TRAIN_N: usize = 60;
/// Holdout size shared by the calibration models.
pub const CALIBRATION_HOLDOUT_N: usize = 2000;
/// Number of calibration models trained by default.
pub const CALIBRATION_K: usize = 5;
pub const TRAIN_STEPS: usize = 400;
pub const TRAIN_LEARNING_RATE: f64 = 0.5;
/// Default fairness tolerance; exact zero is unreachable with finite
/// integer counts.
pub const DEFAULT_EPSILON_FAIR: f64 = 0.02;

/// Slack absorbing floating-point noise in threshold comparisons.
const VERDICT_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParam {
        name: &'static str,
        reason: String,
    },
    #[error("malformed trial record: {0}")]
    RecordParse(String),
}

/// The auditor's two test outcomes with the measured quantities and
/// thresholds they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditVerdict {
    pub fair: bool,
    pub honest: bool,
    pub measured_dp: f64,
    pub measured_detection: f64,
    pub epsilon_fair: f64,
    pub tau_detect: f64,
}

impl AuditVerdict {
    pub fn render(
        measured_dp: f64,
        measured_detection: f64,
        epsilon_fair: f64,
        tau_detect: f64,
    ) -> Self {
        Self {
            fair: measured_dp.abs() <= epsilon_fair + VERDICT_SLACK,
            honest: measured_detection <= tau_detect + VERDICT_SLACK,
            measured_dp,
            measured_detection,
            epsilon_fair,
            tau_detect,
        }
    }
}

/// One full audit interaction, with the honest baseline kept for the
/// concealed-unfairness bookkeeping. Axiom violations are recorded
/// rather than raised so false-positive rates stay observable.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditTrialRecord {
    pub seed: u64,
    pub budget: usize,
    pub strategy_id: String,
    pub hyperparams: BTreeMap<String, f64>,
    pub dp_honest: f64,
    pub verdict: AuditVerdict,
    pub concealed: f64,
    pub flips: usize,
    pub axiom_violations: Vec<String>,
}

/// Draws `n` distinct samples from the prior pool (labels stripped,
/// since the platform never sees them) in canonical id order.
pub fn sample_audit_set(
    pool: &AuditSet,
    n: usize,
    seed: u64,
) -> Result<AuditSet, ProtocolError> {
    if n < 2 || n > pool.len() {
        return Err(ProtocolError::InvalidParam {
            name: "n",
            reason: format!("must lie in [2, pool size {}], got {}", pool.len(), n),
        });
    }
    for attempt in 0..64u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt));
        let mut chosen: Vec<_> = pool
            .samples()
            .choose_multiple(&mut rng, n)
            .cloned()
            .map(|mut s| {
                s.label = None;
                s
            })
            .collect();
        chosen.sort_by_key(|s| s.id);
        match AuditSet::new(chosen) {
            Ok(set) => return Ok(set),
            Err(AuditError::EmptyGroup) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(ProtocolError::InvalidParam {
        name: "n",
        reason: "could not draw both groups from the pool in 64 attempts".into(),
    })
}

/// Runs one audit: checks the two auditing axioms (the honest model is
/// expectable; a fair expectable model exists on s), obtains the
/// strategy's answers, and scores them. The detection threshold is the
/// prior radius tau.
pub fn run_audit(
    strategy: &PlatformStrategy,
    model: &ScoreModel,
    prior: &DatasetPrior,
    s: &AuditSet,
    epsilon_fair: f64,
    seed: u64,
) -> Result<AuditTrialRecord, ProtocolError> {
    let tau = prior.tau();
    let honest = honest_answers(model, s);
    let dp_honest = dp_estimate(&honest, s)?;
    let honest_detection = detection_score(&honest, prior, s)?;

    let mut axiom_violations = Vec::new();
    if honest_detection > tau + VERDICT_SLACK {
        axiom_violations.push(format!(
            "first auditing axiom: honest model is not expectable \
             (detection score {} exceeds tau {})",
            honest_detection, tau
        ));
    }
    let prior_labels = prior.labels_on(s)?;
    let needed = minimal_flips_to_fair(&prior_labels, s, epsilon_fair)?;
    if needed as f64 / s.len() as f64 > tau + VERDICT_SLACK {
        axiom_violations.push(format!(
            "second auditing axiom: no fair expectable model on s \
             ({} of {} flips needed exceeds tau {})",
            needed,
            s.len(),
            tau
        ));
    }

    let outcome = strategy.apply(model, prior, s, epsilon_fair, seed)?;
    let detection = detection_score(&outcome.answers, prior, s)?;
    let verdict = AuditVerdict::render(outcome.achieved_dp, detection, epsilon_fair, tau);
    Ok(AuditTrialRecord {
        seed,
        budget: s.len(),
        strategy_id: outcome.strategy_id,
        hyperparams: outcome.hyperparams,
        dp_honest,
        concealed: (outcome.achieved_dp - dp_honest).abs(),
        flips: outcome.flips,
        verdict,
        axiom_violations,
    })
}

/// Detection threshold calibration: trains k models with distinct seeds
/// on fresh samples, evaluates them on a common labeled holdout, and
/// returns one minus the best accuracy.
pub fn calibrate_tau(
    task: &SyntheticTask,
    k_models: usize,
    holdout_n: usize,
    seed: u64,
) -> Result<f64, ProtocolError> {
    if k_models < 2 {
        return Err(ProtocolError::InvalidParam {
            name: "k_models",
            reason: format!("must be >= 2, got {}", k_models),
        });
    }
    let holdout = generate_task(task, holdout_n, derive_seed(seed, 0))?;
    let mut best_accuracy = 0.0f64;
    for i in 0..k_models {
        let train_seed = derive_seed(seed, 1 + i as u64);
        let train = generate_task(task, CALIBRATION_TRAIN_N, train_seed)?;
        let model = train_score_model(&train, TRAIN_STEPS, TRAIN_LEARNING_RATE, train_seed)?;
        best_accuracy = best_accuracy.max(model.accuracy(&holdout)?);
    }
    Ok((1.0 - best_accuracy).clamp(0.0, 1.0))
}

/// One simulated trial: fresh prior pool, fresh platform training set,
/// fresh audit batch, all from seeds derived from `trial_seed`.
pub fn run_trial(
    strategy: &PlatformStrategy,
    task: &SyntheticTask,
    budget: usize,
    tau_detect: f64,
    epsilon_fair: f64,
    trial_seed: u64,
) -> Result<AuditTrialRecord, ProtocolError> {
    let pool_n = (2 * budget).max(100);
    let pool = generate_task(task, pool_n, derive_seed(trial_seed, 0))?;
    let s = sample_audit_set(&pool, budget, derive_seed(trial_seed, 1))?;
    let prior = DatasetPrior::new(pool, tau_detect)?;
    let train_seed = derive_seed(trial_seed, 2);
    let train = generate_task(task, PLATFORM_TRAIN_N, train_seed)?;
    let model = train_score_model(&train, TRAIN_STEPS, TRAIN_LEARNING_RATE, train_seed)?;
    run_audit(
        strategy,
        &model,
        &prior,
        &s,
        epsilon_fair,
        derive_seed(trial_seed, 3),
    )
    .map(|mut record| {
        record.seed = trial_seed;
        record
    })
}

/// Empirical detection rate of a strategy with a Wilson 95% interval
/// half-width, plus the axiom-violation count for transparency.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRateReport {
    pub rate: f64,
    pub ci_halfwidth: f64,
    pub trials: usize,
    pub detections: usize,
    pub axiom_violation_trials: usize,
    pub tau_detect: f64,
}

pub fn wilson_halfwidth(successes: usize, trials: usize) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let z = 1.959963984540054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / (1.0 + z * z / n)
}

/// Fraction of independent trials in which the strategy is flagged
/// dishonest under a freshly calibrated detection threshold. Each trial
/// re-trains the platform and re-samples the audit set.
pub fn empirical_detection_rate(
    strategy: &PlatformStrategy,
    task: &SyntheticTask,
    budget: usize,
    trials: usize,
    epsilon_fair: f64,
    seed: u64,
) -> Result<DetectionRateReport, ProtocolError> {
    if trials == 0 {
        return Err(ProtocolError::InvalidParam {
            name: "trials",
            reason: "must be >= 1".into(),
        });
    }
    let tau = calibrate_tau(task, CALIBRATION_K, CALIBRATION_HOLDOUT_N, derive_seed(seed, 0))?;
    let mut detections = 0;
    let mut axiom_violation_trials = 0;
    for t in 0..trials {
        let record = run_trial(
            strategy,
            task,
            budget,
            tau,
            epsilon_fair,
            derive_seed(seed, 1 + t as u64),
        )?;
        if !record.verdict.honest {
            detections += 1;
        }
        if !record.axiom_violations.is_empty() {
            axiom_violation_trials += 1;
        }
    }
    Ok(DetectionRateReport {
        rate: detections as f64 / trials as f64,
        ci_halfwidth: wilson_halfwidth(detections, trials),
        trials,
        detections,
        axiom_violation_trials,
        tau_detect: tau,
    })
}

/// Per-strategy trial aggregates for sweep outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyPointStats {
    pub strategy: PlatformStrategy,
    pub trials: usize,
    pub mean_detection: f64,
    pub sd_detection: f64,
    pub mean_concealed: f64,
    pub sd_concealed: f64,
    pub mean_flips: f64,
    pub mean_dp_honest_abs: f64,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `trials` audits of one strategy point and aggregates them. The
/// trial seeds depend only on (seed, trial index), so different
/// strategy points evaluated with the same seed face identical pools,
/// platforms, and audit batches.
pub fn evaluate_strategy_point(
    strategy: &PlatformStrategy,
    task: &SyntheticTask,
    budget: usize,
    tau_detect: f64,
    epsilon_fair: f64,
    trials: usize,
    seed: u64,
) -> Result<(StrategyPointStats, Vec<AuditTrialRecord>), ProtocolError> {
    if trials == 0 {
        return Err(ProtocolError::InvalidParam {
            name: "trials",
            reason: "must be >= 1".into(),
        });
    }
    let mut records = Vec::with_capacity(trials);
    for t in 0..trials {
        records.push(run_trial(
            strategy,
            task,
            budget,
            tau_detect,
            epsilon_fair,
            derive_seed(seed, t as u64),
        )?);
    }
    let detections: Vec<f64> = records.iter().map(|r| r.verdict.measured_detection).collect();
    let concealed: Vec<f64> = records.iter().map(|r| r.concealed).collect();
    let (mean_detection, sd_detection) = mean_sd(&detections);
    let (mean_concealed, sd_concealed) = mean_sd(&concealed);
    let mean_flips =
        records.iter().map(|r| r.flips as f64).sum::<f64>() / trials as f64;
    let mean_dp_honest_abs =
        records.iter().map(|r| r.dp_honest.abs()).sum::<f64>() / trials as f64;
    Ok((
        StrategyPointStats {
            strategy: strategy.clone(),
            trials,
            mean_detection,
            sd_detection,
            mean_concealed,
            sd_concealed,
            mean_flips,
            mean_dp_honest_abs,
        },
        records,
    ))
}

/// Maximum mean concealed unfairness over a grid of strategy points,
/// restricted to points whose mean detection score stays within the
/// threshold; 0 if no point qualifies.
pub fn max_concealable_unfairness(
    grid: &[PlatformStrategy],
    task: &SyntheticTask,
    budget: usize,
    tau_detect: f64,
    epsilon_fair: f64,
    trials: usize,
    seed: u64,
) -> Result<f64, ProtocolError> {
    if grid.is_empty() {
        return Err(ProtocolError::InvalidParam {
            name: "grid",
            reason: "must be non-empty".into(),
        });
    }
    let mut best = 0.0f64;
    for strategy in grid {
        let (stats, _) = evaluate_strategy_point(
            strategy,
            task,
            budget,
            tau_detect,
            epsilon_fair,
            trials,
            seed,
        )?;
        if stats.mean_detection <= tau_detect + VERDICT_SLACK {
            best = best.max(stats.mean_concealed);
        }
    }
    Ok(best)
}

// --- trial record CSV ------------------------------------------------

pub const TRIAL_CSV_HEADER: &str =
    "seed,budget,strategy,hyperparams,dp_honest,dp_manipulated,concealed,detection,flips,fair,honest";

/// `name=value` pairs joined with `;`, empty for parameter-free
/// strategies.
pub fn fmt_hyperparams(hyperparams: &BTreeMap<String, f64>) -> String {
    hyperparams
        .iter()
        .map(|(k, v)| format!("{}={}", k, fmt_f64(*v)))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn write_trial_records<W: Write>(
    records: &[AuditTrialRecord],
    w: &mut W,
) -> Result<(), AuditError> {
    writeln!(w, "{}", TRIAL_CSV_HEADER)?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.budget,
            r.strategy_id,
            fmt_hyperparams(&r.hyperparams),
            fmt_f64(r.dp_honest),
            fmt_f64(r.verdict.measured_dp),
            fmt_f64(r.concealed),
            fmt_f64(r.verdict.measured_detection),
            r.flips,
            r.verdict.fair,
            r.verdict.honest,
        )?;
    }
    Ok(())
}

/// Reads records back; the thresholds behind the verdict booleans are
/// not part of the CSV, so they are restored as the loosest values
/// consistent with the booleans being recomputable.
pub fn read_trial_records<R: BufRead>(
    r: R,
    epsilon_fair: f64,
    tau_detect: f64,
) -> Result<Vec<AuditTrialRecord>, ProtocolError> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(AuditError::from)?;
        if lineno == 0 {
            if line.trim() != TRIAL_CSV_HEADER {
                return Err(ProtocolError::RecordParse(format!(
                    "unexpected header {:?}",
                    line
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(ProtocolError::RecordParse(format!(
                "line {}: expected 11 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64, ProtocolError> {
            s.parse()
                .map_err(|e| ProtocolError::RecordParse(format!("line {}: {}", lineno + 1, e)))
        };
        let parse_u = |s: &str| -> Result<u64, ProtocolError> {
            s.parse()
                .map_err(|e| ProtocolError::RecordParse(format!("line {}: {}", lineno + 1, e)))
        };
        let parse_b = |s: &str| -> Result<bool, ProtocolError> {
            s.parse()
                .map_err(|e| ProtocolError::RecordParse(format!("line {}: {}", lineno + 1, e)))
        };
        let mut hyperparams = BTreeMap::new();
        if !fields[3].is_empty() {
            for pair in fields[3].split(';') {
                let (k, v) = pair.split_once('=').ok_or_else(|| {
                    ProtocolError::RecordParse(format!(
                        "line {}: bad hyperparam {:?}",
                        lineno + 1,
                        pair
                    ))
                })?;
                hyperparams.insert(k.to_string(), parse_f(v)?);
            }
        }
        let dp_manipulated = parse_f(fields[5])?;
        let detection = parse_f(fields[7])?;
        out.push(AuditTrialRecord {
            seed: parse_u(fields[0])?,
            budget: parse_u(fields[1])? as usize,
            strategy_id: fields[2].to_string(),
            hyperparams,
            dp_honest: parse_f(fields[4])?,
            concealed: parse_f(fields[6])?,
            flips: parse_u(fields[8])? as usize,
            verdict: AuditVerdict {
                fair: parse_b(fields[9])?,
                honest: parse_b(fields[10])?,
                measured_dp: dp_manipulated,
                measured_detection: detection,
                epsilon_fair,
                tau_detect,
            },
            axiom_violations: Vec::new(),
        });
    }
    Ok(out)
}
