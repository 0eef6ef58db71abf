//! ShuffleSplit cross-validation and micro-averaged multi-label metrics.

mod cv;
mod metrics;
mod split;

pub use cv::{
    cross_validate, evaluate_fold, prepare, render_table, EvalConfig, EvaluationReport, FoldOutcome, FoldResult,
    LabelResult, Mode, Prepared,
};
pub use metrics::{compute_metrics, confusion, macro_metrics, per_label_confusion, Confusion, Metrics};
pub use split::{shuffle_split, test_size, Fold, FoldPlan, SplitParams, MIN_SAMPLES};

use crate::forest::ForestError;
use crate::text::TextError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },
    #[error("n_splits must be positive")]
    NoSplits,
    #[error("test_fraction must lie strictly between 0 and 1, got {0}")]
    InvalidTestFraction(f64),
    #[error("a test fraction of {test} rows out of {n} leaves an empty train or test set")]
    DegenerateSplit { n: usize, test: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no label has enough positive examples ({dropped} dropped)")]
    NoUsableLabels { dropped: usize },
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}
