//! The platform side of the audit game: synthetic task generation, a
//! logistic scoring model, and the manipulation strategies (honest,
//! optimal projection, four fairness-repair adaptations, and the
//! prior-aware attack available when the auditor prior leaks).

use crate::audit::{
    dp_estimate, fair_count_targets, fair_hyperplane, minimal_flips_to_fair, AnswerVector,
    AuditError, AuditSample, AuditSet, DatasetPrior,
};
use crate::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error("training diverged: loss became non-finite at step {step}")]
    Diverged { step: usize },
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("invalid hyperparameter {name}={value}: {reason}")]
    InvalidHyperparam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("auditing axiom violated: {0}")]
    AxiomViolation(String),
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("malformed model file: {0}")]
    ModelParse(String),
}

/// Parameters of the synthetic binary task the platform solves. Labels
/// follow a logistic model over Gaussian features with a per-group mean
/// shift, an additive logit offset for group 1 (controls ground-truth
/// unfairness) and a symmetric label-flip rate (controls aleatoric
/// noise, hence task difficulty).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub feature_dim: usize,
    pub group1_rate: f64,
    pub group_mean_shift: Vec<f64>,
    pub true_weights: Vec<f64>,
    pub intercept: f64,
    pub group_bias: f64,
    pub label_noise: f64,
}

impl SyntheticTask {
    pub fn validate(&self) -> Result<(), StrategyError> {
        if self.feature_dim == 0 {
            return Err(StrategyError::InvalidTask("feature_dim must be >= 1".into()));
        }
        if !(self.group1_rate > 0.0 && self.group1_rate < 1.0) {
            return Err(StrategyError::InvalidTask(
                "group1_rate must lie in (0, 1)".into(),
            ));
        }
        if self.group_mean_shift.len() != self.feature_dim
            || self.true_weights.len() != self.feature_dim
        {
            return Err(StrategyError::InvalidTask(
                "group_mean_shift and true_weights must match feature_dim".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(StrategyError::InvalidTask(
                "label_noise must lie in [0, 0.5)".into(),
            ));
        }
        Ok(())
    }

    /// Low-noise task with near-deterministic labels and no group effect
    /// on the ground truth. Twelve features so that sample size buys
    /// real accuracy: the platform's large training set keeps it well
    /// under the calibrated detection threshold.
    pub fn default_easy() -> Self {
        Self {
            feature_dim: 12,
            group1_rate: 0.5,
            group_mean_shift: vec![0.0; 12],
            true_weights: vec![
                4.0, 3.0, -3.0, 2.0, -2.0, 2.0, 1.0, -1.0, 1.0, 1.0, -1.0, 1.0,
            ],
            intercept: 0.0,
            group_bias: 0.0,
            label_noise: 0.02,
        }
    }

    /// Noisy task with a strong group effect; trained models stay well
    /// away from the Bayes optimum and the ground truth is unfair.
    pub fn default_hard() -> Self {
        Self {
            feature_dim: 12,
            group1_rate: 0.5,
            group_mean_shift: vec![
                0.8, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            ],
            true_weights: vec![
                0.8, 0.6, -0.5, 0.4, 0.4, -0.3, 0.3, 0.2, -0.2, 0.2, 0.1, -0.1,
            ],
            intercept: 0.0,
            group_bias: 1.5,
            label_noise: 0.2,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn sample_one(task: &SyntheticTask, rng: &mut ChaCha8Rng) -> (bool, Vec<f64>, bool) {
    let group = rng.gen::<f64>() < task.group1_rate;
    let sign = if group { 0.5 } else { -0.5 };
    let mut logit = task.intercept + if group { task.group_bias } else { 0.0 };
    let mut features = Vec::with_capacity(task.feature_dim);
    for j in 0..task.feature_dim {
        let z: f64 = rng.sample(StandardNormal);
        let x = z + sign * task.group_mean_shift[j];
        logit += task.true_weights[j] * x;
        features.push(x);
    }
    let mut label = rng.gen::<f64>() < sigmoid(logit);
    if task.label_noise > 0.0 && rng.gen::<f64>() < task.label_noise {
        label = !label;
    }
    (group, features, label)
}

/// Draws a fully labeled audit set of size n from the task generator.
/// Deterministic per seed; regenerates (with a derived seed) until both
/// groups are non-empty.
pub fn generate_task(task: &SyntheticTask, n: usize, seed: u64) -> Result<AuditSet, StrategyError> {
    task.validate()?;
    if n < 2 {
        return Err(StrategyError::InvalidTask("n must be >= 2".into()));
    }
    for attempt in 0..64u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt));
        let samples: Vec<AuditSample> = (0..n)
            .map(|id| {
                let (group, features, label) = sample_one(task, &mut rng);
                AuditSample {
                    id,
                    features,
                    group,
                    label: Some(label),
                }
            })
            .collect();
        match AuditSet::new(samples) {
            Ok(set) => return Ok(set),
            Err(AuditError::EmptyGroup) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(StrategyError::InvalidTask(
        "could not draw both groups in 64 attempts; group1_rate too extreme".into(),
    ))
}

/// Streaming Monte Carlo estimate of the population DP of the labels
/// emitted by the generator. Independent of any trained model.
pub fn population_label_dp(task: &SyntheticTask, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = [0u64; 2];
    let mut tot = [0u64; 2];
    for _ in 0..samples {
        let (group, _, label) = sample_one(task, &mut rng);
        tot[group as usize] += 1;
        if label {
            pos[group as usize] += 1;
        }
    }
    pos[1] as f64 / tot[1].max(1) as f64 - pos[0] as f64 / tot[0].max(1) as f64
}

/// Linear scorer: score(x) = sigmoid(weights . x + intercept).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl ScoreModel {
    pub fn score(&self, features: &[f64]) -> f64 {
        let z: f64 = self
            .weights
            .iter()
            .zip(features)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.intercept;
        sigmoid(z)
    }

    pub fn scores(&self, s: &AuditSet) -> Vec<f64> {
        s.samples().iter().map(|x| self.score(&x.features)).collect()
    }

    pub fn accuracy(&self, s: &AuditSet) -> Result<f64, StrategyError> {
        let labels = s.labels()?;
        let answers = honest_answers(self, s);
        Ok(1.0 - answers.hamming(&labels) as f64 / s.len() as f64)
    }
}

/// Mean log-loss and its gradient, optionally with the squared DP
/// surrogate penalty lambda * (w_fair . p)^2 used by the linear
/// relaxation strategy. Public so tests can check the analytic
/// gradients against finite differences.
pub fn logistic_loss_grad(
    features: &[Vec<f64>],
    targets: &[bool],
    weights: &[f64],
    intercept: f64,
    penalty: Option<(&[f64], f64)>,
) -> (f64, Vec<f64>, f64) {
    let n = features.len() as f64;
    let d = weights.len();
    let probs: Vec<f64> = features
        .iter()
        .map(|x| {
            sigmoid(
                weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + intercept,
            )
        })
        .collect();
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; d];
    let mut grad_b = 0.0;
    for (i, x) in features.iter().enumerate() {
        let p = probs[i].clamp(1e-12, 1.0 - 1e-12);
        let y = targets[i] as u8 as f64;
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        let dz = (probs[i] - y) / n;
        for j in 0..d {
            grad_w[j] += dz * x[j];
        }
        grad_b += dz;
    }
    loss /= n;
    if let Some((fair_weights, lambda)) = penalty {
        let dp: f64 = fair_weights.iter().zip(&probs).map(|(w, p)| w * p).sum();
        loss += lambda * dp * dp;
        for (i, x) in features.iter().enumerate() {
            let dz = 2.0 * lambda * dp * fair_weights[i] * probs[i] * (1.0 - probs[i]);
            for j in 0..d {
                grad_w[j] += dz * x[j];
            }
            grad_b += dz;
        }
    }
    (loss, grad_w, grad_b)
}

fn fit_logistic(
    features: &[Vec<f64>],
    targets: &[bool],
    steps: usize,
    learning_rate: f64,
    penalty: Option<(&[f64], f64)>,
) -> Result<ScoreModel, StrategyError> {
    let d = features.first().map_or(0, |x| x.len());
    let mut weights = vec![0.0; d];
    let mut intercept = 0.0;
    for step in 0..steps {
        let (loss, grad_w, grad_b) =
            logistic_loss_grad(features, targets, &weights, intercept, penalty);
        if !loss.is_finite() {
            return Err(StrategyError::Diverged { step });
        }
        for j in 0..d {
            weights[j] -= learning_rate * grad_w[j];
        }
        intercept -= learning_rate * grad_b;
    }
    Ok(ScoreModel { weights, intercept })
}

/// Logistic regression fit by full-batch gradient descent on the log
/// loss, initialized at zero. The seed is part of the signature for
/// reproducibility bookkeeping; with zero initialization the fit is
/// already deterministic.
pub fn train_score_model(
    train: &AuditSet,
    steps: usize,
    learning_rate: f64,
    _seed: u64,
) -> Result<ScoreModel, StrategyError> {
    let labels = train.labels()?;
    if labels.bits().iter().all(|&b| b) || labels.bits().iter().all(|&b| !b) {
        return Err(StrategyError::SingleClass);
    }
    let features: Vec<Vec<f64>> = train.samples().iter().map(|s| s.features.clone()).collect();
    fit_logistic(&features, labels.bits(), steps, learning_rate, None)
}

/// Thresholds scores at 0.5; a score of exactly 0.5 classifies positive.
pub fn honest_answers(model: &ScoreModel, s: &AuditSet) -> AnswerVector {
    AnswerVector::new(model.scores(s).iter().map(|&p| p >= 0.5).collect())
}

/// A strategy's answers plus bookkeeping: Hamming distance to the
/// strategy's unmanipulated baseline, the achieved DP, and the
/// hyperparameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulationOutcome {
    pub answers: AnswerVector,
    pub flips: usize,
    pub achieved_dp: f64,
    pub strategy_id: String,
    pub hyperparams: BTreeMap<String, f64>,
}

fn outcome(
    answers: AnswerVector,
    baseline: &AnswerVector,
    s: &AuditSet,
    strategy_id: &str,
    hyperparams: BTreeMap<String, f64>,
) -> Result<ManipulationOutcome, StrategyError> {
    let flips = answers.hamming(baseline);
    let achieved_dp = dp_estimate(&answers, s)?;
    Ok(ManipulationOutcome {
        answers,
        flips,
        achieved_dp,
        strategy_id: strategy_id.to_string(),
        hyperparams,
    })
}

/// Flips `delta.abs()` answers in the given group positions toward the
/// sign of `delta`, preferring samples whose scores are closest to the
/// 0.5 decision boundary (ties by position).
fn flip_near_boundary(
    bits: &mut [bool],
    scores: &[f64],
    positions: &[usize],
    delta: i64,
) {
    if delta == 0 {
        return;
    }
    let target = delta > 0;
    let mut candidates: Vec<usize> = positions
        .iter()
        .copied()
        .filter(|&i| bits[i] != target)
        .collect();
    candidates.sort_by(|&a, &b| {
        let da = (scores[a] - 0.5).abs();
        let db = (scores[b] - 0.5).abs();
        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
    });
    for &i in candidates.iter().take(delta.unsigned_abs() as usize) {
        bits[i] = target;
    }
}

/// Minimal-flip projection of the honest answers onto the fair set:
/// the per-group count changes come from the exhaustive count search,
/// and within each group-direction the samples closest to the decision
/// boundary are flipped first.
pub fn optimal_projection(
    model: &ScoreModel,
    s: &AuditSet,
    epsilon_fair: f64,
) -> Result<ManipulationOutcome, StrategyError> {
    let honest = honest_answers(model, s);
    let (d0, d1) = fair_count_targets(&honest, s, epsilon_fair)?;
    let scores = model.scores(s);
    let mut bits = honest.bits().to_vec();
    flip_near_boundary(&mut bits, &scores, &s.group_positions(false), d0);
    flip_near_boundary(&mut bits, &scores, &s.group_positions(true), d1);
    outcome(
        AnswerVector::new(bits),
        &honest,
        s,
        "optimal_projection",
        BTreeMap::from([("epsilon_fair".to_string(), epsilon_fair)]),
    )
}

/// Reject-option repair: inside the critical band |score - 0.5| <=
/// theta, the group with the lower honest positive rate on s gets 1 and
/// the other gets 0; outside the band the honest answers stand.
pub fn roc_mitigation(
    model: &ScoreModel,
    s: &AuditSet,
    theta: f64,
) -> Result<ManipulationOutcome, StrategyError> {
    if !(0.0..=0.5).contains(&theta) {
        return Err(StrategyError::InvalidHyperparam {
            name: "theta",
            value: theta,
            reason: "must lie in [0, 0.5]",
        });
    }
    let honest = honest_answers(model, s);
    let hyper = BTreeMap::from([("theta".to_string(), theta)]);
    if theta == 0.0 {
        let answers = honest.clone();
        return outcome(answers, &honest, s, "roc_mitigation", hyper);
    }
    let scores = model.scores(s);
    let mut pos = [0usize; 2];
    let mut tot = [0usize; 2];
    for (sample, &b) in s.samples().iter().zip(honest.bits()) {
        tot[sample.group as usize] += 1;
        if b {
            pos[sample.group as usize] += 1;
        }
    }
    // ties favor group 0 as the disadvantaged group
    let disadvantaged = (pos[1] as f64 / tot[1] as f64) < (pos[0] as f64 / tot[0] as f64);
    let bits = s
        .samples()
        .iter()
        .zip(&scores)
        .zip(honest.bits())
        .map(|((sample, &score), &h)| {
            if (score - 0.5).abs() <= theta {
                sample.group == disadvantaged
            } else {
                h
            }
        })
        .collect();
    outcome(AnswerVector::new(bits), &honest, s, "roc_mitigation", hyper)
}

/// Rank-preserving partial transport of each group's score distribution
/// toward the pooled distribution: a sample at rank r in its group of
/// size m is moved to (1-t) * own score + t * pooled quantile at level
/// (r + 1/2)/m, then thresholded at 0.5.
pub fn label_transport(
    model: &ScoreModel,
    s: &AuditSet,
    t: f64,
) -> Result<ManipulationOutcome, StrategyError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(StrategyError::InvalidHyperparam {
            name: "t",
            value: t,
            reason: "must lie in [0, 1]",
        });
    }
    let honest = honest_answers(model, s);
    let scores = model.scores(s);
    let mut pooled: Vec<f64> = scores.clone();
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = pooled.len();
    let mut new_scores = scores.clone();
    for group in [false, true] {
        let mut positions = s.group_positions(group);
        positions.sort_by(|&a, &b| {
            scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b))
        });
        let m = positions.len();
        for (rank, &i) in positions.iter().enumerate() {
            let level = (rank as f64 + 0.5) / m as f64;
            let pooled_q = pooled[((level * n as f64).floor() as usize).min(n - 1)];
            new_scores[i] = (1.0 - t) * scores[i] + t * pooled_q;
        }
    }
    let bits = new_scores.iter().map(|&p| p >= 0.5).collect();
    outcome(
        AnswerVector::new(bits),
        &honest,
        s,
        "label_transport",
        BTreeMap::from([("t".to_string(), t)]),
    )
}

/// Re-fits a logistic model on the honest answers with the squared
/// plug-in DP of the predicted probabilities as a differentiable
/// fairness penalty, then thresholds the refit scores at 0.5.
pub fn linear_relaxation(
    model: &ScoreModel,
    s: &AuditSet,
    lambda: f64,
    steps: usize,
    learning_rate: f64,
    _seed: u64,
) -> Result<ManipulationOutcome, StrategyError> {
    if lambda < 0.0 {
        return Err(StrategyError::InvalidHyperparam {
            name: "lambda",
            value: lambda,
            reason: "must be non-negative",
        });
    }
    let honest = honest_answers(model, s);
    let hyperplane = fair_hyperplane(s)?;
    let features: Vec<Vec<f64>> = s.samples().iter().map(|x| x.features.clone()).collect();
    let refit = fit_logistic(
        &features,
        honest.bits(),
        steps,
        learning_rate,
        Some((hyperplane.weights(), lambda)),
    )?;
    let answers = honest_answers(&refit, s);
    outcome(
        answers,
        &honest,
        s,
        "linear_relaxation",
        BTreeMap::from([
            ("lambda".to_string(), lambda),
            ("steps".to_string(), steps as f64),
            ("learning_rate".to_string(), learning_rate),
        ]),
    )
}

/// Per-group threshold search over the observed group scores plus the
/// sentinels {0, 1/2, 1}: among pairs whose DP satisfies the fairness
/// constraint, picks the one disagreeing least with the honest answers;
/// ties prefer fewer flips in group 1, then the lower group-0
/// threshold, then the lower group-1 threshold.
pub fn threshold_manipulation(
    model: &ScoreModel,
    s: &AuditSet,
    epsilon_fair: f64,
) -> Result<ManipulationOutcome, StrategyError> {
    let honest = honest_answers(model, s);
    let scores = model.scores(s);
    let per_group: Vec<GroupThresholds> = [false, true]
        .iter()
        .map(|&g| GroupThresholds::build(&scores, &s.group_positions(g)))
        .collect();
    let mut best: Option<(usize, usize, f64, f64)> = None; // (flips, flips1, t0, t1)
    let mut best_pair = (0.5, 0.5);
    for &(t0, pos0, flips0) in &per_group[0].entries {
        for &(t1, pos1, flips1) in &per_group[1].entries {
            let dp = pos1 as f64 / per_group[1].size as f64 - pos0 as f64 / per_group[0].size as f64;
            if dp.abs() > epsilon_fair + 1e-12 {
                continue;
            }
            let key = (flips0 + flips1, flips1, t0, t1);
            let better = match best {
                None => true,
                Some(b) => {
                    (key.0, key.1) < (b.0, b.1)
                        || ((key.0, key.1) == (b.0, b.1)
                            && (key.2, key.3) < (b.2, b.3))
                }
            };
            if better {
                best = Some(key);
                best_pair = (t0, t1);
            }
        }
    }
    let (t0, t1) = best_pair;
    let bits = s
        .samples()
        .iter()
        .zip(&scores)
        .map(|(sample, &score)| score >= if sample.group { t1 } else { t0 })
        .collect();
    outcome(
        AnswerVector::new(bits),
        &honest,
        s,
        "threshold_manipulation",
        BTreeMap::from([
            ("epsilon_fair".to_string(), epsilon_fair),
            ("t0".to_string(), t0),
            ("t1".to_string(), t1),
        ]),
    )
}

struct GroupThresholds {
    size: usize,
    /// (threshold, positives under `score >= t`, flips vs honest)
    entries: Vec<(f64, usize, usize)>,
}

impl GroupThresholds {
    fn build(scores: &[f64], positions: &[usize]) -> Self {
        let mut sorted: Vec<f64> = positions.iter().map(|&i| scores[i]).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut candidates: Vec<f64> = sorted.clone();
        candidates.extend([0.0, 0.5, 1.0]);
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        candidates.dedup();
        let count_ge = |t: f64| sorted.len() - sorted.partition_point(|&x| x < t);
        let honest_pos = count_ge(0.5);
        let entries = candidates
            .iter()
            .map(|&t| {
                let pos = count_ge(t);
                // answers differ from honest exactly on scores between t and 0.5
                let flips = if t <= 0.5 {
                    pos - honest_pos
                } else {
                    honest_pos - pos
                };
                (t, pos, flips)
            })
            .collect();
        Self {
            size: positions.len(),
            entries,
        }
    }
}

/// The attack of a platform that knows the auditor prior: it answers
/// with the prior's own labels projected onto the fair set, appearing
/// both fair and honest whenever a fair expectable model exists.
pub fn prior_aware_attack(
    prior: &DatasetPrior,
    s: &AuditSet,
    epsilon_fair: f64,
) -> Result<ManipulationOutcome, StrategyError> {
    let labels = prior.labels_on(s)?;
    let needed = minimal_flips_to_fair(&labels, s, epsilon_fair)?;
    if needed as f64 / s.len() as f64 > prior.tau() + 1e-12 {
        return Err(StrategyError::AxiomViolation(format!(
            "no fair expectable model on this audit set (P \u{2229} F empty: \
             {} flips needed over {} samples exceeds tau = {})",
            needed,
            s.len(),
            prior.tau()
        )));
    }
    let (d0, d1) = fair_count_targets(&labels, s, epsilon_fair)?;
    let mut bits = labels.bits().to_vec();
    // no scores to rank by; flip in position order for determinism
    for (group, delta) in [(false, d0), (true, d1)] {
        if delta == 0 {
            continue;
        }
        let target = delta > 0;
        let mut remaining = delta.unsigned_abs() as usize;
        for i in s.group_positions(group) {
            if remaining == 0 {
                break;
            }
            if bits[i] != target {
                bits[i] = target;
                remaining -= 1;
            }
        }
    }
    outcome(
        AnswerVector::new(bits),
        &labels,
        s,
        "prior_aware",
        BTreeMap::from([("epsilon_fair".to_string(), epsilon_fair)]),
    )
}

/// A platform strategy together with its hyperparameters, as selected in
/// scenario files and hyperparameter grids.
#[derive(Debug, Clone, PartialEq)]
pub enum PlatformStrategy {
    Honest,
    OptimalProjection,
    RocMitigation { theta: f64 },
    LabelTransport { t: f64 },
    LinearRelaxation { lambda: f64, steps: usize, learning_rate: f64 },
    ThresholdManipulation,
    PriorAware,
}

impl PlatformStrategy {
    pub fn apply(
        &self,
        model: &ScoreModel,
        prior: &DatasetPrior,
        s: &AuditSet,
        epsilon_fair: f64,
        seed: u64,
    ) -> Result<ManipulationOutcome, StrategyError> {
        match self {
            PlatformStrategy::Honest => {
                let honest = honest_answers(model, s);
                outcome(honest.clone(), &honest, s, "honest", BTreeMap::new())
            }
            PlatformStrategy::OptimalProjection => optimal_projection(model, s, epsilon_fair),
            PlatformStrategy::RocMitigation { theta } => roc_mitigation(model, s, *theta),
            PlatformStrategy::LabelTransport { t } => label_transport(model, s, *t),
            PlatformStrategy::LinearRelaxation {
                lambda,
                steps,
                learning_rate,
            } => linear_relaxation(model, s, *lambda, *steps, *learning_rate, seed),
            PlatformStrategy::ThresholdManipulation => {
                threshold_manipulation(model, s, epsilon_fair)
            }
            PlatformStrategy::PriorAware => prior_aware_attack(prior, s, epsilon_fair),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            PlatformStrategy::Honest => "honest",
            PlatformStrategy::OptimalProjection => "optimal_projection",
            PlatformStrategy::RocMitigation { .. } => "roc_mitigation",
            PlatformStrategy::LabelTransport { .. } => "label_transport",
            PlatformStrategy::LinearRelaxation { .. } => "linear_relaxation",
            PlatformStrategy::ThresholdManipulation => "threshold_manipulation",
            PlatformStrategy::PriorAware => "prior_aware",
        }
    }

    /// The hyperparameters that vary across grid points.
    pub fn hyperparams(&self) -> BTreeMap<String, f64> {
        match self {
            PlatformStrategy::RocMitigation { theta } => {
                BTreeMap::from([("theta".to_string(), *theta)])
            }
            PlatformStrategy::LabelTransport { t } => BTreeMap::from([("t".to_string(), *t)]),
            PlatformStrategy::LinearRelaxation {
                lambda,
                steps,
                learning_rate,
            } => BTreeMap::from([
                ("lambda".to_string(), *lambda),
                ("steps".to_string(), *steps as f64),
                ("learning_rate".to_string(), *learning_rate),
            ]),
            _ => BTreeMap::new(),
        }
    }

    /// Stable textual tag including hyperparameters, used in CSV output.
    pub fn tag(&self) -> String {
        match self {
            PlatformStrategy::RocMitigation { theta } => format!("roc_mitigation:{}", theta),
            PlatformStrategy::LabelTransport { t } => format!("label_transport:{}", t),
            PlatformStrategy::LinearRelaxation { lambda, .. } => {
                format!("linear_relaxation:{}", lambda)
            }
            other => other.id().to_string(),
        }
    }
}

// --- model serialization --------------------------------------------

/// Writes `weight_i,value` rows followed by an `intercept,value` row.
pub fn write_score_model<W: Write>(model: &ScoreModel, w: &mut W) -> Result<(), AuditError> {
    for (i, weight) in model.weights.iter().enumerate() {
        writeln!(w, "weight_{},{:.16e}", i, weight)?;
    }
    writeln!(w, "intercept,{:.16e}", model.intercept)?;
    Ok(())
}

pub fn read_score_model<R: BufRead>(r: R) -> Result<ScoreModel, StrategyError> {
    let mut weights = Vec::new();
    let mut intercept = None;
    for line in r.lines() {
        let line = line.map_err(AuditError::from)?;
        if line.trim().is_empty() {
            continue;
        }
        let (name, value) = line
            .split_once(',')
            .ok_or_else(|| StrategyError::ModelParse(format!("bad row {:?}", line)))?;
        let value: f64 = value
            .parse()
            .map_err(|e| StrategyError::ModelParse(format!("bad value: {}", e)))?;
        if name == "intercept" {
            intercept = Some(value);
        } else if name.starts_with("weight_") {
            weights.push(value);
        } else {
            return Err(StrategyError::ModelParse(format!("unknown row {:?}", name)));
        }
    }
    Ok(ScoreModel {
        weights,
        intercept: intercept.ok_or_else(|| StrategyError::ModelParse("missing intercept".into()))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_deterministic() {
        let task = SyntheticTask::default_easy();
        let a = generate_task(&task, 50, 7).unwrap();
        let b = generate_task(&task, 50, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_task(&task, 50, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generator_symmetric_task_is_fair() {
        let mut task = SyntheticTask::default_easy();
        task.label_noise = 0.0;
        let set = generate_task(&task, 10_000, 3).unwrap();
        let dp = dp_estimate(&set.labels().unwrap(), &set).unwrap();
        assert!(dp.abs() <= 0.05, "dp = {}", dp);
    }

    #[test]
    fn generator_biased_task_is_unfair() {
        let task = SyntheticTask::default_hard();
        let set = generate_task(&task, 10_000, 3).unwrap();
        let dp = dp_estimate(&set.labels().unwrap(), &set).unwrap();
        assert!(dp > 0.2, "dp = {}", dp);
    }

    #[test]
    fn training_separable_toy() {
        let samples: Vec<AuditSample> = [(-2.0, false, false), (-1.5, false, false),
            (1.5, true, true), (2.0, true, true)]
            .iter()
            .enumerate()
            .map(|(i, &(x, group, label))| AuditSample {
                id: i,
                features: vec![x],
                group,
                label: Some(label),
            })
            .collect();
        let set = AuditSet::new(samples).unwrap();
        let model = train_score_model(&set, 500, 0.5, 0).unwrap();
        assert_eq!(model.accuracy(&set).unwrap(), 1.0);
    }

    #[test]
    fn training_rejects_single_class() {
        let samples: Vec<AuditSample> = (0..4)
            .map(|i| AuditSample {
                id: i,
                features: vec![i as f64],
                group: i % 2 == 0,
                label: Some(true),
            })
            .collect();
        let set = AuditSet::new(samples).unwrap();
        assert_eq!(
            train_score_model(&set, 10, 0.1, 0),
            Err(StrategyError::SingleClass)
        );
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let features = vec![
            vec![0.3, -1.2],
            vec![-0.7, 0.4],
            vec![1.1, 0.9],
            vec![-0.2, -0.5],
        ];
        let targets = vec![true, false, true, false];
        let weights = vec![0.0, 0.0];
        let (_, grad_w, grad_b) =
            logistic_loss_grad(&features, &targets, &weights, 0.0, None);
        let h = 1e-6;
        for j in 0..2 {
            let mut wp = weights.clone();
            wp[j] += h;
            let mut wm = weights.clone();
            wm[j] -= h;
            let (lp, _, _) = logistic_loss_grad(&features, &targets, &wp, 0.0, None);
            let (lm, _, _) = logistic_loss_grad(&features, &targets, &wm, 0.0, None);
            let fd = (lp - lm) / (2.0 * h);
            assert!((grad_w[j] - fd).abs() < 1e-6, "j={}: {} vs {}", j, grad_w[j], fd);
        }
        let (lp, _, _) = logistic_loss_grad(&features, &targets, &weights, h, None);
        let (lm, _, _) = logistic_loss_grad(&features, &targets, &weights, -h, None);
        assert!((grad_b - (lp - lm) / (2.0 * h)).abs() < 1e-6);
    }

    #[test]
    fn honest_tie_rounds_up() {
        let model = ScoreModel {
            weights: vec![0.0],
            intercept: 0.0,
        };
        let samples: Vec<AuditSample> = (0..2)
            .map(|i| AuditSample {
                id: i,
                features: vec![1.0],
                group: i == 0,
                label: None,
            })
            .collect();
        let set = AuditSet::new(samples).unwrap();
        assert!(honest_answers(&model, &set).bits().iter().all(|&b| b));
    }
}
