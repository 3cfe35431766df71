//! Audit-game domain types and estimators: audit sets, answer vectors,
//! the plug-in demographic-parity estimator, the detection score against
//! a labeled prior, and the fair hyperplane induced by a finite audit
//! set.
//!
//! Theory lives in l2 on R^{|S|} while simulations live in Hamming
//! distance on {0,1}^{|S|}; for binary vectors the two are linked by
//! ||u - v||_2^2 = |S| * hamming_fraction(u, v). Both distances are
//! exposed so the conversion is explicit at the call site.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AuditError {
    #[error("audit set must contain at least one sample from each group")]
    EmptyGroup,
    #[error("feature dimension mismatch: expected {expected}, sample {idx} has {got}")]
    FeatureDimMismatch {
        expected: usize,
        got: usize,
        idx: usize,
    },
    #[error("answer vector length {answers} does not match audit set size {set}")]
    LengthMismatch { answers: usize, set: usize },
    #[error("prior has no label for audited sample id {0}")]
    MissingLabel(usize),
    #[error("dataset prior requires every sample to carry a label")]
    UnlabeledPrior,
    #[error("detection threshold tau must lie in [0, 1], got {0}")]
    TauOutOfRange(f64),
    #[error("malformed record at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for AuditError {
    fn from(e: std::io::Error) -> Self {
        AuditError::Io(e.to_string())
    }
}

/// One audited query: feature vector, binary protected group and an
/// optional ground-truth label (always present in prior datasets).
#[derive(Debug, Clone, PartialEq)]
pub struct AuditSample {
    pub id: usize,
    pub features: Vec<f64>,
    /// true = protected group 1
    pub group: bool,
    pub label: Option<bool>,
}

/// An ordered batch of audit queries. Both protected groups are
/// non-empty by construction so the DP estimator is always defined.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditSet {
    samples: Vec<AuditSample>,
}

impl AuditSet {
    pub fn new(samples: Vec<AuditSample>) -> Result<Self, AuditError> {
        let n1 = samples.iter().filter(|s| s.group).count();
        if n1 == 0 || n1 == samples.len() {
            return Err(AuditError::EmptyGroup);
        }
        if let Some(first) = samples.first() {
            let d = first.features.len();
            for (i, s) in samples.iter().enumerate() {
                if s.features.len() != d {
                    return Err(AuditError::FeatureDimMismatch {
                        expected: d,
                        got: s.features.len(),
                        idx: i,
                    });
                }
            }
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[AuditSample] {
        &self.samples
    }

    pub fn group_size(&self, group: bool) -> usize {
        self.samples.iter().filter(|s| s.group == group).count()
    }

    /// Positions (not ids) of the samples belonging to `group`.
    pub fn group_positions(&self, group: bool) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.group == group)
            .map(|(i, _)| i)
            .collect()
    }

    /// Labels as an answer vector; errors if any label is missing.
    pub fn labels(&self) -> Result<AnswerVector, AuditError> {
        let bits = self
            .samples
            .iter()
            .map(|s| s.label.ok_or(AuditError::MissingLabel(s.id)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AnswerVector::new(bits))
    }
}

/// Binary answers aligned by position to an audit set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerVector {
    bits: Vec<bool>,
}

impl AnswerVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn hamming(&self, other: &AnswerVector) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }

    fn check_aligned(&self, s: &AuditSet) -> Result<(), AuditError> {
        if self.bits.len() != s.len() {
            return Err(AuditError::LengthMismatch {
                answers: self.bits.len(),
                set: s.len(),
            });
        }
        Ok(())
    }
}

/// The auditor's private labeled dataset plus the normalized detection
/// threshold tau.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPrior {
    data: AuditSet,
    tau: f64,
    labels_by_id: HashMap<usize, bool>,
}

impl DatasetPrior {
    pub fn new(data: AuditSet, tau: f64) -> Result<Self, AuditError> {
        if data.samples().iter().any(|s| s.label.is_none()) {
            return Err(AuditError::UnlabeledPrior);
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(AuditError::TauOutOfRange(tau));
        }
        let labels_by_id = data
            .samples()
            .iter()
            .map(|s| (s.id, s.label.unwrap()))
            .collect();
        Ok(Self {
            data,
            tau,
            labels_by_id,
        })
    }

    pub fn data(&self) -> &AuditSet {
        &self.data
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn label_for(&self, id: usize) -> Option<bool> {
        self.labels_by_id.get(&id).copied()
    }

    /// The prior labels restricted to the samples of `s`.
    pub fn labels_on(&self, s: &AuditSet) -> Result<AnswerVector, AuditError> {
        let bits = s
            .samples()
            .iter()
            .map(|sample| {
                self.label_for(sample.id)
                    .ok_or(AuditError::MissingLabel(sample.id))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AnswerVector::new(bits))
    }
}

/// Normal vector of the fair hyperplane on a finite audit set:
/// w_i = 1/|S_1| for group-1 positions, -1/|S_0| for group-0 positions,
/// so that the plug-in DP estimator is the inner product w . v.
#[derive(Debug, Clone, PartialEq)]
pub struct FairHyperplane {
    weights: Vec<f64>,
}

impl FairHyperplane {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dot(&self, answers: &AnswerVector) -> f64 {
        self.weights
            .iter()
            .zip(answers.bits())
            .map(|(w, &b)| if b { *w } else { 0.0 })
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Plug-in demographic parity: positive rate of group 1 minus positive
/// rate of group 0 on the audit set.
pub fn dp_estimate(answers: &AnswerVector, s: &AuditSet) -> Result<f64, AuditError> {
    answers.check_aligned(s)?;
    let mut pos = [0usize; 2];
    let mut tot = [0usize; 2];
    for (sample, &bit) in s.samples().iter().zip(answers.bits()) {
        let g = sample.group as usize;
        tot[g] += 1;
        if bit {
            pos[g] += 1;
        }
    }
    Ok(pos[1] as f64 / tot[1] as f64 - pos[0] as f64 / tot[0] as f64)
}

/// Normalized Hamming disagreement between the platform's answers and
/// the prior labels on the audited samples.
pub fn detection_score(
    answers: &AnswerVector,
    prior: &DatasetPrior,
    s: &AuditSet,
) -> Result<f64, AuditError> {
    answers.check_aligned(s)?;
    let labels = prior.labels_on(s)?;
    Ok(answers.hamming(&labels) as f64 / s.len() as f64)
}

pub fn fair_hyperplane(s: &AuditSet) -> Result<FairHyperplane, AuditError> {
    let n1 = s.group_size(true);
    let n0 = s.group_size(false);
    if n0 == 0 || n1 == 0 {
        return Err(AuditError::EmptyGroup);
    }
    let weights = s
        .samples()
        .iter()
        .map(|sample| {
            if sample.group {
                1.0 / n1 as f64
            } else {
                -1.0 / n0 as f64
            }
        })
        .collect();
    Ok(FairHyperplane { weights })
}

/// Euclidean distance from the answer vector, seen as a point of
/// R^{|S|}, to the fair hyperplane: |dp| / sqrt(1/|S_0| + 1/|S_1|).
pub fn distance_to_fair_l2(answers: &AnswerVector, s: &AuditSet) -> Result<f64, AuditError> {
    let dp = dp_estimate(answers, s)?;
    let n0 = s.group_size(false) as f64;
    let n1 = s.group_size(true) as f64;
    Ok(dp.abs() / (1.0 / n0 + 1.0 / n1).sqrt())
}

/// Signed per-group positive-count changes (group 0, group 1) that bring
/// |dp| below epsilon with the fewest flips. DP depends only on the two
/// positive counts, so the search space is the count grid. Ties prefer
/// smaller |delta c_1|, then smaller |delta c_0|.
pub fn fair_count_targets(
    answers: &AnswerVector,
    s: &AuditSet,
    epsilon: f64,
) -> Result<(i64, i64), AuditError> {
    answers.check_aligned(s)?;
    let n0 = s.group_size(false) as i64;
    let n1 = s.group_size(true) as i64;
    let mut c = [0i64; 2];
    for (sample, &bit) in s.samples().iter().zip(answers.bits()) {
        if bit {
            c[sample.group as usize] += 1;
        }
    }
    let mut best: Option<(i64, i64, i64)> = None; // (flips, |d1|, d-pair key)
    let mut best_pair = (0i64, 0i64);
    for t1 in 0..=n1 {
        for t0 in 0..=n0 {
            let dp = t1 as f64 / n1 as f64 - t0 as f64 / n0 as f64;
            if dp.abs() > epsilon + 1e-12 {
                continue;
            }
            let d0 = t0 - c[0];
            let d1 = t1 - c[1];
            let flips = d0.abs() + d1.abs();
            let key = (flips, d1.abs(), d0.abs());
            if best.map_or(true, |b| key < b) {
                best = Some(key);
                best_pair = (d0, d1);
            }
        }
    }
    // the all-zeros vector is always fair, so a solution exists
    Ok(best_pair)
}

/// Minimum Hamming distance from `answers` to any binary vector whose
/// plug-in DP is within epsilon of zero.
pub fn minimal_flips_to_fair(
    answers: &AnswerVector,
    s: &AuditSet,
    epsilon: f64,
) -> Result<usize, AuditError> {
    let (d0, d1) = fair_count_targets(answers, s, epsilon)?;
    Ok((d0.abs() + d1.abs()) as usize)
}

// --- CSV formats -----------------------------------------------------

/// 17-significant-digit scientific notation so every finite f64
/// round-trips exactly through text.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Writes `idx,group,label,feature_0..feature_{d-1}`; the label column
/// is empty for unlabeled queries.
pub fn write_audit_set<W: Write>(s: &AuditSet, w: &mut W) -> Result<(), AuditError> {
    let d = s.samples().first().map_or(0, |x| x.features.len());
    let mut header = String::from("idx,group,label");
    for i in 0..d {
        header.push_str(&format!(",feature_{}", i));
    }
    writeln!(w, "{}", header)?;
    for sample in s.samples() {
        let label = match sample.label {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        let mut line = format!("{},{},{}", sample.id, sample.group as u8, label);
        for f in &sample.features {
            line.push(',');
            line.push_str(&fmt_f64(*f));
        }
        writeln!(w, "{}", line)?;
    }
    Ok(())
}

pub fn read_audit_set<R: BufRead>(r: R) -> Result<AuditSet, AuditError> {
    let mut samples = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            continue; // header
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(AuditError::Parse {
                line: lineno + 1,
                reason: "expected at least idx,group,label".into(),
            });
        }
        let parse_err = |reason: String| AuditError::Parse {
            line: lineno + 1,
            reason,
        };
        let id: usize = fields[0]
            .parse()
            .map_err(|e| parse_err(format!("bad idx: {}", e)))?;
        let group = match fields[1] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(format!("bad group {:?}", other))),
        };
        let label = match fields[2] {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => return Err(parse_err(format!("bad label {:?}", other))),
        };
        let features = fields[3..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(format!("bad feature: {}", e)))?;
        samples.push(AuditSample {
            id,
            features,
            group,
            label,
        });
    }
    AuditSet::new(samples)
}

/// Writes `idx,answer`, one row per audited sample.
pub fn write_answers<W: Write>(
    answers: &AnswerVector,
    s: &AuditSet,
    w: &mut W,
) -> Result<(), AuditError> {
    answers.check_aligned(s)?;
    writeln!(w, "idx,answer")?;
    for (sample, &bit) in s.samples().iter().zip(answers.bits()) {
        writeln!(w, "{},{}", sample.id, bit as u8)?;
    }
    Ok(())
}

pub fn read_answers<R: BufRead>(r: R) -> Result<Vec<(usize, bool)>, AuditError> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| AuditError::Parse {
            line: lineno + 1,
            reason,
        };
        let (idx, answer) = line
            .split_once(',')
            .ok_or_else(|| parse_err("expected idx,answer".into()))?;
        let idx: usize = idx
            .parse()
            .map_err(|e| parse_err(format!("bad idx: {}", e)))?;
        let answer = match answer {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(format!("bad answer {:?}", other))),
        };
        out.push((idx, answer));
    }
    Ok(out)
}
