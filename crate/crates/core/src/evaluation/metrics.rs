use serde::{Deserialize, Serialize};

use super::EvalError;

/// Cell counts pooled over every (sample, label) pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub hamming_loss: f64,
}

impl Confusion {
    pub fn cells(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    /// Precision and recall default to 1.0 when their denominator is zero;
    /// F is 0 when both are 0.
    pub fn metrics(&self) -> Metrics {
        let precision = if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        };
        let recall = if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        };
        let f_measure = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let cells = self.cells();
        let hamming_loss = if cells == 0 {
            0.0
        } else {
            (self.fp + self.fn_) as f64 / cells as f64
        };
        Metrics {
            precision,
            recall,
            f_measure,
            hamming_loss,
        }
    }
}

fn check_shape(y_true: &[Vec<bool>], y_pred: &[Vec<bool>]) -> Result<usize, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::ShapeMismatch(format!(
            "{} true rows vs {} predicted rows",
            y_true.len(),
            y_pred.len()
        )));
    }
    let l = y_true.first().map_or(0, Vec::len);
    if y_true.is_empty() || l == 0 {
        return Err(EvalError::ShapeMismatch("need at least one row and one label".into()));
    }
    for (i, (t, p)) in y_true.iter().zip(y_pred).enumerate() {
        if t.len() != l || p.len() != l {
            return Err(EvalError::ShapeMismatch(format!(
                "row {i} has {} true and {} predicted labels, expected {l}",
                t.len(),
                p.len()
            )));
        }
    }
    Ok(l)
}

/// Micro-averaged confusion over all cells.
pub fn confusion(y_true: &[Vec<bool>], y_pred: &[Vec<bool>]) -> Result<Confusion, EvalError> {
    check_shape(y_true, y_pred)?;
    let mut c = Confusion::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        for (&a, &b) in t.iter().zip(p) {
            match (a, b) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
    }
    Ok(c)
}

/// One confusion per label column.
pub fn per_label_confusion(y_true: &[Vec<bool>], y_pred: &[Vec<bool>]) -> Result<Vec<Confusion>, EvalError> {
    let l = check_shape(y_true, y_pred)?;
    let mut out = vec![Confusion::default(); l];
    for (t, p) in y_true.iter().zip(y_pred) {
        for (c, (&a, &b)) in out.iter_mut().zip(t.iter().zip(p)) {
            match (a, b) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
    }
    Ok(out)
}

pub fn compute_metrics(y_true: &[Vec<bool>], y_pred: &[Vec<bool>]) -> Result<Metrics, EvalError> {
    Ok(confusion(y_true, y_pred)?.metrics())
}

/// Unweighted mean of per-label metrics.
pub fn macro_metrics(per_label: &[Confusion]) -> Metrics {
    let all: Vec<Metrics> = per_label.iter().map(Confusion::metrics).collect();
    mean(&all)
}

pub(crate) fn mean(ms: &[Metrics]) -> Metrics {
    let n = ms.len().max(1) as f64;
    let sum = |f: fn(&Metrics) -> f64| ms.iter().map(f).sum::<f64>() / n;
    Metrics {
        precision: sum(|m| m.precision),
        recall: sum(|m| m.recall),
        f_measure: sum(|m| m.f_measure),
        hamming_loss: sum(|m| m.hamming_loss),
    }
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub(crate) fn sample_std(ms: &[Metrics]) -> Metrics {
    if ms.len() < 2 {
        return Metrics {
            precision: 0.0,
            recall: 0.0,
            f_measure: 0.0,
            hamming_loss: 0.0,
        };
    }
    let m = mean(ms);
    let d = (ms.len() - 1) as f64;
    let sd = |f: fn(&Metrics) -> f64, mu: f64| (ms.iter().map(|x| (f(x) - mu).powi(2)).sum::<f64>() / d).sqrt();
    Metrics {
        precision: sd(|x| x.precision, m.precision),
        recall: sd(|x| x.recall, m.recall),
        f_measure: sd(|x| x.f_measure, m.f_measure),
        hamming_loss: sd(|x| x.hamming_loss, m.hamming_loss),
    }
}
