use serde::{Deserialize, Serialize};

use crate::ingest::Action;

/// Confusion counts with LC as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_pairs(labels: &[Action], preds: &[Action]) -> Self {
        let mut c = Self::default();
        for (&y, &p) in labels.iter().zip(preds) {
            match (y, p) {
                (Action::Lc, Action::Lc) => c.tp += 1,
                (Action::Lk, Action::Lc) => c.fp += 1,
                (Action::Lc, Action::Lk) => c.fn_ += 1,
                (Action::Lk, Action::Lk) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Metric from counts; 0/0 is reported as 0.
fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 { 0.0 } else { a as f64 / b as f64 }
}

impl ClassMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            support: tp + fn_,
        }
    }
}

/// Overall metrics are support-weighted averages of the two classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub lk: ClassMetrics,
    pub lc: ClassMetrics,
    pub confusion: Confusion,
}

impl EvalReport {
    pub fn from_confusion(c: Confusion) -> Self {
        let lc = ClassMetrics::from_counts(c.tp, c.fp, c.fn_);
        let lk = ClassMetrics::from_counts(c.tn, c.fn_, c.fp);
        let n = c.total();
        let w = |a: f64, b: f64| (a * lk.support as f64 + b * lc.support as f64) / n.max(1) as f64;
        Self {
            accuracy: ratio(c.tp + c.tn, n),
            precision: w(lk.precision, lc.precision),
            recall: w(lk.recall, lc.recall),
            f1: w(lk.f1, lc.f1),
            lk,
            lc,
            confusion: c,
        }
    }

    pub fn from_pairs(labels: &[Action], preds: &[Action]) -> Self {
        Self::from_confusion(Confusion::from_pairs(labels, preds))
    }
}
