//! Flat key-value scenario files. One `key = value` pair per line,
//! `#` comments, dotted prefixes for task parameters, repeated
//! `strategy` keys for the strategy grid. Example:
//!
//! ```text
//! task.label_noise = 0.2
//! task.group_bias = 1.5
//! budgets = 100, 250, 500
//! trials = 20
//! epsilon_fair = 0.02
//! seed = 42
//! strategy = honest
//! strategy = roc_mitigation theta=0.1
//! ```
//!
//! Unset keys keep the documented defaults (the low-noise default task,
//! budgets 100..2000, 20 trials, epsilon 0.02, seed 42, an honest-only
//! grid). `tau` overrides threshold calibration when present.

use fairaudit_core::strategies::{PlatformStrategy, SyntheticTask};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("scenario line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("scenario field {field}: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub task: SyntheticTask,
    pub budgets: Vec<usize>,
    pub strategies: Vec<PlatformStrategy>,
    pub trials: usize,
    pub epsilon_fair: f64,
    pub tau_override: Option<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            task: SyntheticTask::default_easy(),
            budgets: vec![100, 250, 500, 1000, 2000],
            strategies: vec![PlatformStrategy::Honest],
            trials: 20,
            epsilon_fair: 0.02,
            tau_override: None,
            seed: 42,
            out: None,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.task.validate().map_err(|e| ScenarioError::Invalid {
            field: "task",
            message: e.to_string(),
        })?;
        if self.budgets.is_empty() {
            return Err(ScenarioError::Invalid {
                field: "budgets",
                message: "must be non-empty".into(),
            });
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ScenarioError::Invalid {
                field: "budgets",
                message: "must be strictly ascending".into(),
            });
        }
        if self.budgets[0] < 10 {
            return Err(ScenarioError::Invalid {
                field: "budgets",
                message: "all budgets must be >= 10".into(),
            });
        }
        if self.trials < 1 {
            return Err(ScenarioError::Invalid {
                field: "trials",
                message: "must be >= 1".into(),
            });
        }
        if self.strategies.is_empty() {
            return Err(ScenarioError::Invalid {
                field: "strategy",
                message: "at least one strategy required".into(),
            });
        }
        if !(self.epsilon_fair >= 0.0 && self.epsilon_fair.is_finite()) {
            return Err(ScenarioError::Invalid {
                field: "epsilon_fair",
                message: "must be a non-negative finite number".into(),
            });
        }
        if let Some(tau) = self.tau_override {
            if !(0.0..=1.0).contains(&tau) {
                return Err(ScenarioError::Invalid {
                    field: "tau",
                    message: "must lie in [0, 1]".into(),
                });
            }
        }
        Ok(())
    }
}

fn parse_err<T: std::fmt::Display>(line: usize) -> impl Fn(T) -> ScenarioError {
    move |e| ScenarioError::Parse {
        line,
        message: e.to_string(),
    }
}

fn parse_f64_list(value: &str, line: usize) -> Result<Vec<f64>, ScenarioError> {
    value
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(parse_err(line)))
        .collect()
}

/// Parses a strategy grid point: a name followed by optional
/// `key=value` hyperparameters, e.g. `linear_relaxation lambda=50`.
pub fn parse_strategy(spec: &str) -> Result<PlatformStrategy, String> {
    let mut tokens = spec.split_whitespace();
    let name = tokens.next().ok_or("empty strategy spec")?;
    let mut params = std::collections::BTreeMap::new();
    for token in tokens {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got {:?}", token))?;
        let v: f64 = v.parse().map_err(|e| format!("{}: {}", k, e))?;
        params.insert(k.to_string(), v);
    }
    let mut take = |key: &str| -> Option<f64> { params.remove(key) };
    let strategy = match name {
        "honest" => PlatformStrategy::Honest,
        "optimal_projection" => PlatformStrategy::OptimalProjection,
        "threshold_manipulation" => PlatformStrategy::ThresholdManipulation,
        "prior_aware" => PlatformStrategy::PriorAware,
        "roc_mitigation" => PlatformStrategy::RocMitigation {
            theta: take("theta").ok_or("roc_mitigation requires theta")?,
        },
        "label_transport" => PlatformStrategy::LabelTransport {
            t: take("t").ok_or("label_transport requires t")?,
        },
        "linear_relaxation" => PlatformStrategy::LinearRelaxation {
            lambda: take("lambda").ok_or("linear_relaxation requires lambda")?,
            steps: take("steps").unwrap_or(400.0) as usize,
            learning_rate: take("learning_rate").unwrap_or(0.5),
        },
        other => return Err(format!("unknown strategy {:?}", other)),
    };
    if let Some(key) = params.keys().next() {
        return Err(format!("unknown hyperparameter {:?} for {}", key, name));
    }
    Ok(strategy)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut scenario = Scenario::default();
    let mut explicit_strategies = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ScenarioError::Parse {
            line: lineno,
            message: "expected `key = value`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "task.feature_dim" => {
                scenario.task.feature_dim = value.parse().map_err(parse_err(lineno))?
            }
            "task.group1_rate" => {
                scenario.task.group1_rate = value.parse().map_err(parse_err(lineno))?
            }
            "task.group_mean_shift" => {
                scenario.task.group_mean_shift = parse_f64_list(value, lineno)?
            }
            "task.true_weights" => scenario.task.true_weights = parse_f64_list(value, lineno)?,
            "task.intercept" => scenario.task.intercept = value.parse().map_err(parse_err(lineno))?,
            "task.group_bias" => {
                scenario.task.group_bias = value.parse().map_err(parse_err(lineno))?
            }
            "task.label_noise" => {
                scenario.task.label_noise = value.parse().map_err(parse_err(lineno))?
            }
            "budgets" => {
                scenario.budgets = value
                    .split(',')
                    .map(|v| v.trim().parse::<usize>().map_err(parse_err(lineno)))
                    .collect::<Result<_, _>>()?
            }
            "trials" => scenario.trials = value.parse().map_err(parse_err(lineno))?,
            "epsilon_fair" => scenario.epsilon_fair = value.parse().map_err(parse_err(lineno))?,
            "tau" => scenario.tau_override = Some(value.parse().map_err(parse_err(lineno))?),
            "seed" => scenario.seed = value.parse().map_err(parse_err(lineno))?,
            "out" => scenario.out = Some(PathBuf::from(value)),
            "strategy" => explicit_strategies.push(parse_strategy(value).map_err(
                |message| ScenarioError::Parse {
                    line: lineno,
                    message,
                },
            )?),
            other => {
                return Err(ScenarioError::Parse {
                    line: lineno,
                    message: format!("unknown key {:?}", other),
                })
            }
        }
    }
    if !explicit_strategies.is_empty() {
        scenario.strategies = explicit_strategies;
    }
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_scenario() {
        let text = "\
# hard setting
task.label_noise = 0.2
task.group_bias = 1.5
budgets = 100, 250
trials = 5
epsilon_fair = 0.03
tau = 0.25
seed = 7
strategy = honest
strategy = roc_mitigation theta=0.1
strategy = linear_relaxation lambda=50
";
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.task.label_noise, 0.2);
        assert_eq!(s.budgets, vec![100, 250]);
        assert_eq!(s.trials, 5);
        assert_eq!(s.epsilon_fair, 0.03);
        assert_eq!(s.tau_override, Some(0.25));
        assert_eq!(s.seed, 7);
        assert_eq!(s.strategies.len(), 3);
        assert_eq!(
            s.strategies[1],
            PlatformStrategy::RocMitigation { theta: 0.1 }
        );
        assert_eq!(
            s.strategies[2],
            PlatformStrategy::LinearRelaxation {
                lambda: 50.0,
                steps: 400,
                learning_rate: 0.5
            }
        );
    }

    #[test]
    fn rejects_unknown_key_with_line_number() {
        let err = parse_scenario("task.label_noize = 0.1\n").unwrap_err();
        assert_eq!(
            err,
            ScenarioError::Parse {
                line: 1,
                message: "unknown key \"task.label_noize\"".into()
            }
        );
    }

    #[test]
    fn rejects_unsorted_budgets_by_field_name() {
        let err = parse_scenario("budgets = 200, 100\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid { field: "budgets", .. }));
    }

    #[test]
    fn rejects_unknown_hyperparameter() {
        assert!(parse_strategy("roc_mitigation theta=0.1 beta=2").is_err());
        assert!(parse_strategy("honest theta=0.1").is_err());
    }
}
