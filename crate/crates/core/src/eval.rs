//! QSAR regressors repurposed as AC and potency-direction classifiers, plus
//! metrics and aggregation over cross-validation trials.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::mmp::{AcClass, MmpRecord, PotencyDirection};
use crate::split::SplitPlan;

pub const DEFAULT_D_CRIT: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} predictions for {1} targets")]
    Length(usize, usize),
    #[error("no prediction for compound {0}")]
    MissingPrediction(usize),
    #[error("non-finite prediction for compound {0}")]
    NonFinite(usize),
    #[error("MMP {0} is not in the MMP table")]
    UnknownMmp(usize),
}

/// AC iff the predicted partner deviates from the known label by more than
/// `d_crit`.
pub fn classify_ac_inter(a_known: f64, f_pred: f64, d_crit: f64) -> AcClass {
    if libm::fabs(a_known - f_pred) > d_crit {
        AcClass::Ac
    } else {
        AcClass::NonAc
    }
}

pub fn classify_ac_test(f1: f64, f2: f64, d_crit: f64) -> AcClass {
    if libm::fabs(f1 - f2) > d_crit {
        AcClass::Ac
    } else {
        AcClass::NonAc
    }
}

pub fn classify_pd(f1: f64, f2: f64) -> PotencyDirection {
    if f1 > f2 {
        PotencyDirection::FirstMoreActive
    } else if f2 > f1 {
        PotencyDirection::SecondMoreActive
    } else {
        PotencyDirection::Tie
    }
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::Length(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| libm::fabs(p - t)).sum::<f64>() / pred.len() as f64)
}

pub fn accuracy(correct: usize, total: usize) -> Result<f64, EvalError> {
    if total == 0 {
        return Err(EvalError::Empty);
    }
    Ok(correct as f64 / total as f64)
}

/// Binary confusion counts with ACs as positives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn new(tp: usize, fp: usize, fn_: usize, tn: usize) -> Confusion {
        Confusion { tp, fp, fn_, tn }
    }

    pub fn record(&mut self, predicted_positive: bool, actual_positive: bool) {
        match (predicted_positive, actual_positive) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn predicted_positives(&self) -> usize {
        self.tp + self.fp
    }

    /// Matthews correlation; 0 whenever a marginal is empty, which covers
    /// the case of no positive predictions.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom == 0.0 {
            return 0.0;
        }
        (tp * tn - fp * fn_) / libm::sqrt(denom)
    }

    /// `None` without actual positives.
    pub fn sensitivity(&self) -> Option<f64> {
        let p = self.tp + self.fn_;
        (p > 0).then(|| self.tp as f64 / p as f64)
    }

    /// `None` without positive predictions (ill-defined).
    pub fn precision(&self) -> Option<f64> {
        let p = self.tp + self.fp;
        (p > 0).then(|| self.tp as f64 / p as f64)
    }

    pub fn specificity(&self) -> Option<f64> {
        let n = self.tn + self.fp;
        (n > 0).then(|| self.tn as f64 / n as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let t = self.total();
        (t > 0).then(|| (self.tp + self.tn) as f64 / t as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SetKind {
    Inter,
    Test,
    Cores,
}

impl SetKind {
    pub const ALL: [SetKind; 3] = [SetKind::Inter, SetKind::Test, SetKind::Cores];

    pub fn as_str(self) -> &'static str {
        match self {
            SetKind::Inter => "inter",
            SetKind::Test => "test",
            SetKind::Cores => "cores",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AcDecision {
    pub mmp_id: usize,
    pub set_kind: SetKind,
    pub predicted: AcClass,
    pub truth: AcClass,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SetMetrics {
    pub n_mmps: usize,
    pub confusion: Confusion,
    pub ac_mcc: f64,
    pub ac_sensitivity: Option<f64>,
    pub ac_precision: Option<f64>,
    /// Over MMPs whose true labels differ.
    pub pd_accuracy: Option<f64>,
    pub pd_evaluated: usize,
    /// Over MMPs predicted to be ACs whose true labels differ.
    pub pd_accuracy_on_predicted_acs: Option<f64>,
    pub pd_evaluated_on_predicted_acs: usize,
    /// Prediction ties, counted as misclassified.
    pub pd_prediction_ties: usize,
    pub mcc_zeroed: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialMetrics {
    pub i: usize,
    pub j: usize,
    pub qsar_mae: f64,
    pub sets: BTreeMap<SetKind, SetMetrics>,
}

/// Scores one trial. `predictions[c]` must be set for every test compound
/// and every compound of an MMP in `m_inter`; labels of test compounds are
/// read only to compute errors, never as classifier inputs.
pub fn evaluate_trial(
    plan: &SplitPlan,
    labels: &[f64],
    predictions: &[Option<f64>],
    mmps: &[MmpRecord],
    d_crit: f64,
) -> Result<(TrialMetrics, Vec<AcDecision>), EvalError> {
    let pred = |c: usize| -> Result<f64, EvalError> {
        let v = predictions.get(c).copied().flatten().ok_or(EvalError::MissingPrediction(c))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite(c))
        }
    };
    let test_pred: Vec<f64> = plan.d_test.iter().map(|&c| pred(c)).collect::<Result<_, _>>()?;
    let test_truth: Vec<f64> = plan.d_test.iter().map(|&c| labels[c]).collect();
    let qsar_mae = mae(&test_pred, &test_truth)?;

    let mut in_train = alloc::vec![false; labels.len()];
    for &c in &plan.d_train {
        in_train[c] = true;
    }
    let by_id: BTreeMap<usize, &MmpRecord> = mmps.iter().map(|m| (m.mmp_id, m)).collect();

    let mut sets = BTreeMap::new();
    let mut decisions = Vec::new();
    for kind in SetKind::ALL {
        let ids = match kind {
            SetKind::Inter => &plan.m_inter,
            SetKind::Test => &plan.m_test,
            SetKind::Cores => &plan.m_cores,
        };
        let mut confusion = Confusion::default();
        let (mut pd_ok, mut pd_n, mut pd_ac_ok, mut pd_ac_n, mut ties) = (0, 0, 0, 0, 0);
        for &id in ids {
            let m = *by_id.get(&id).ok_or(EvalError::UnknownMmp(id))?;
            let (f1, f2) = (pred(m.index_1)?, pred(m.index_2)?);
            let predicted = match kind {
                SetKind::Inter => {
                    // the known compound is the one in d_train
                    let (known, other) = if in_train[m.index_1] {
                        (m.index_1, f2)
                    } else {
                        (m.index_2, f1)
                    };
                    classify_ac_inter(labels[known], other, d_crit)
                }
                SetKind::Test | SetKind::Cores => classify_ac_test(f1, f2, d_crit),
            };
            confusion.record(predicted == AcClass::Ac, m.ac_class == AcClass::Ac);
            decisions.push(AcDecision {
                mmp_id: id,
                set_kind: kind,
                predicted,
                truth: m.ac_class,
            });
            if m.pd == PotencyDirection::Tie {
                continue;
            }
            let pd_pred = classify_pd(f1, f2);
            if pd_pred == PotencyDirection::Tie {
                ties += 1;
            }
            let ok = pd_pred == m.pd;
            pd_n += 1;
            pd_ok += ok as usize;
            if predicted == AcClass::Ac {
                pd_ac_n += 1;
                pd_ac_ok += ok as usize;
            }
        }
        sets.insert(
            kind,
            SetMetrics {
                n_mmps: ids.len(),
                confusion,
                ac_mcc: confusion.mcc(),
                ac_sensitivity: confusion.sensitivity(),
                ac_precision: confusion.precision(),
                pd_accuracy: accuracy(pd_ok, pd_n).ok(),
                pd_evaluated: pd_n,
                pd_accuracy_on_predicted_acs: accuracy(pd_ac_ok, pd_ac_n).ok(),
                pd_evaluated_on_predicted_acs: pd_ac_n,
                pd_prediction_ties: ties,
                mcc_zeroed: confusion.predicted_positives() == 0,
            },
        );
    }
    Ok((
        TrialMetrics {
            i: plan.i,
            j: plan.j,
            qsar_mae,
            sets,
        },
        decisions,
    ))
}

/// Mean and sample standard deviation over the trials where a metric is
/// defined.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Summary {
        let xs: Vec<f64> = values.into_iter().flatten().collect();
        let n = xs.len();
        if n == 0 {
            return Summary {
                mean: None,
                std: None,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = (n >= 2).then(|| libm::sqrt(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64));
        Summary {
            mean: Some(mean),
            std,
            n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SetSummary {
    pub ac_mcc: Summary,
    pub ac_sensitivity: Summary,
    pub ac_precision: Summary,
    pub pd_accuracy: Summary,
    pub pd_accuracy_on_predicted_acs: Summary,
    pub precision_ill_defined_trials: usize,
    pub mcc_zeroed_trials: usize,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub model: String,
    pub trials: Vec<TrialMetrics>,
    pub qsar_mae: Summary,
    pub sets: BTreeMap<SetKind, SetSummary>,
}

impl EvalReport {
    /// Aggregates trials, ordered by `(i, j)`.
    pub fn aggregate(model: impl Into<String>, mut trials: Vec<TrialMetrics>) -> EvalReport {
        trials.sort_by_key(|t| (t.i, t.j));
        let qsar_mae = Summary::of(trials.iter().map(|t| Some(t.qsar_mae)));
        let mut sets = BTreeMap::new();
        for kind in SetKind::ALL {
            let per: Vec<&SetMetrics> = trials.iter().filter_map(|t| t.sets.get(&kind)).collect();
            sets.insert(
                kind,
                SetSummary {
                    ac_mcc: Summary::of(per.iter().map(|s| Some(s.ac_mcc))),
                    ac_sensitivity: Summary::of(per.iter().map(|s| s.ac_sensitivity)),
                    ac_precision: Summary::of(per.iter().map(|s| s.ac_precision)),
                    pd_accuracy: Summary::of(per.iter().map(|s| s.pd_accuracy)),
                    pd_accuracy_on_predicted_acs: Summary::of(per.iter().map(|s| s.pd_accuracy_on_predicted_acs)),
                    precision_ill_defined_trials: per.iter().filter(|s| s.ac_precision.is_none()).count(),
                    mcc_zeroed_trials: per.iter().filter(|s| s.mcc_zeroed).count(),
                },
            );
        }
        EvalReport {
            model: model.into(),
            trials,
            qsar_mae,
            sets,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_rules() {
        assert_eq!(classify_ac_inter(0.0, 1.5, 1.5), AcClass::NonAc);
        assert_eq!(classify_ac_inter(0.0, 1.6, 1.5), AcClass::Ac);
        assert_eq!(classify_ac_inter(3.0, 3.0, 1.5), AcClass::NonAc);
        assert_eq!(classify_ac_test(0.0, 2.0, 1.5), AcClass::Ac);
        assert_eq!(classify_ac_test(2.0, 0.0, 1.5), AcClass::Ac);
        assert_eq!(classify_ac_test(0.0, 1.0, 1.5), AcClass::NonAc);
        assert_eq!(classify_pd(1.0, 2.0), PotencyDirection::SecondMoreActive);
        assert_eq!(classify_pd(2.0, 1.0), PotencyDirection::FirstMoreActive);
        assert_eq!(classify_pd(1.0, 1.0), PotencyDirection::Tie);
    }

    #[test]
    fn mcc_worked_example() {
        let c = Confusion::new(2, 1, 1, 6);
        assert!((c.mcc() - 11.0 / 21.0).abs() < 1e-15);
        assert_eq!(c.sensitivity(), Some(2.0 / 3.0));
        assert_eq!(c.precision(), Some(2.0 / 3.0));
    }

    #[test]
    fn no_positive_predictions() {
        let c = Confusion::new(0, 0, 3, 10);
        assert_eq!(c.mcc(), 0.0);
        assert_eq!(c.precision(), None);
        assert_eq!(c.sensitivity(), Some(0.0));
    }

    #[test]
    fn summary_uses_sample_std() {
        let s = Summary::of([Some(1.0), Some(3.0), None]);
        assert_eq!(s.mean, Some(2.0));
        assert_eq!(s.n, 2);
        assert!((s.std.unwrap() - libm::sqrt(2.0)).abs() < 1e-15);
        assert_eq!(Summary::of([None]).mean, None);
    }

    #[test]
    fn mae_errors() {
        assert_eq!(mae(&[], &[]), Err(EvalError::Empty));
        assert_eq!(mae(&[1.0, 2.0], &[0.0, 0.0]), Ok(1.5));
    }
}
