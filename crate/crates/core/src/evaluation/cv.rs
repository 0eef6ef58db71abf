use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mean, per_label_confusion, sample_std, Confusion, Metrics};
use super::split::{shuffle_split, Fold, SplitParams};
use super::{macro_metrics, EvalError};
use crate::dataset::Dataset;
use crate::forest::{ForestHyperparams, ForestModel};
use crate::miner::ProjectRef;
use crate::text::{preprocess, CleaningConfig, TfidfModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OneProject,
    MultiProject,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::OneProject => "One",
            Mode::MultiProject => "Multi",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub hyperparams: ForestHyperparams,
    pub split: SplitParams,
    pub min_df: usize,
    pub threshold: f64,
    pub cleaning: CleaningConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            hyperparams: ForestHyperparams::default(),
            split: SplitParams::default(),
            min_df: 2,
            threshold: 0.5,
            cleaning: CleaningConfig::default(),
        }
    }
}

/// Tokenized examples and the label columns kept for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub tokens: Vec<Vec<String>>,
    pub y: Vec<Vec<bool>>,
    pub labels: Vec<String>,
    /// Labels with fewer positives than there are splits.
    pub dropped_labels: Vec<String>,
}

pub fn prepare(dataset: &Dataset, config: &EvalConfig) -> Prepared {
    let counts = dataset.label_counts();
    let (labels, dropped_labels): (Vec<String>, Vec<String>) = dataset
        .label_universe
        .iter()
        .cloned()
        .partition(|l| counts.get(l).copied().unwrap_or(0) >= config.split.n_splits);
    if !dropped_labels.is_empty() {
        tracing::warn!(
            count = dropped_labels.len(),
            labels = ?dropped_labels,
            "dropping labels with fewer than {} positive examples",
            config.split.n_splits
        );
    }
    let tokens = dataset
        .examples
        .iter()
        .map(|e| preprocess(&e.title, &e.body, &config.cleaning))
        .collect();
    Prepared {
        tokens,
        y: dataset.label_matrix(&labels),
        labels,
        dropped_labels,
    }
}

/// Everything produced while evaluating one fold.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    /// Fitted on the fold's training rows only.
    pub tfidf: TfidfModel,
    /// `None` when every label is constant on the training rows.
    pub forest: Option<ForestModel>,
    pub y_true: Vec<Vec<bool>>,
    pub y_pred: Vec<Vec<bool>>,
}

/// Fit TF-IDF and the forest on `fold.train`, predict `fold.test`. Labels that
/// are constant on the training rows are predicted as that constant.
pub fn evaluate_fold(data: &Prepared, fold: &Fold, config: &EvalConfig) -> Result<FoldOutcome, EvalError> {
    let train_tokens: Vec<&Vec<String>> = fold.train.iter().map(|&i| &data.tokens[i]).collect();
    let tfidf = TfidfModel::fit(
        train_tokens.iter().map(|t| t.as_slice()),
        config.min_df,
        config.cleaning.clone(),
    )?;
    let x_train: Vec<_> = train_tokens.iter().map(|t| tfidf.transform(t)).collect();
    let y_train: Vec<&Vec<bool>> = fold.train.iter().map(|&i| &data.y[i]).collect();

    let n = y_train.len();
    let mut constant: Vec<Option<bool>> = Vec::with_capacity(data.labels.len());
    let mut active = Vec::new();
    for l in 0..data.labels.len() {
        let pos = y_train.iter().filter(|r| r[l]).count();
        if pos == 0 || pos == n {
            constant.push(Some(pos == n));
        } else {
            constant.push(None);
            active.push(l);
        }
    }

    let forest = if active.is_empty() {
        None
    } else {
        let labels: Vec<String> = active.iter().map(|&l| data.labels[l].clone()).collect();
        let y: Vec<Vec<bool>> = y_train.iter().map(|r| active.iter().map(|&l| r[l]).collect()).collect();
        Some(ForestModel::train(&x_train, &y, &labels, &config.hyperparams)?)
    };

    let mut y_pred = Vec::with_capacity(fold.test.len());
    for &i in &fold.test {
        let x = tfidf.transform(&data.tokens[i]);
        let active_row = match &forest {
            Some(f) => f.predict_row(&x, config.threshold)?,
            None => Vec::new(),
        };
        let mut next = active_row.into_iter();
        let row = constant
            .iter()
            .map(|c| match c {
                Some(v) => *v,
                None => next.next().expect("one prediction per active label"),
            })
            .collect();
        y_pred.push(row);
    }
    let y_true = fold.test.iter().map(|&i| data.y[i].clone()).collect();
    Ok(FoldOutcome {
        tfidf,
        forest,
        y_true,
        y_pred,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub n_train: usize,
    pub n_test: usize,
    pub confusion: Confusion,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelResult {
    pub label: String,
    /// Positive test cells pooled over folds.
    pub support: u64,
    pub confusion: Confusion,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub mode: Mode,
    pub project: Option<ProjectRef>,
    pub n_examples: usize,
    pub label_universe: Vec<String>,
    pub dropped_labels: Vec<String>,
    pub split: SplitParams,
    pub hyperparams: ForestHyperparams,
    pub min_df: usize,
    pub threshold: f64,
    pub per_fold: Vec<FoldResult>,
    /// Mean of the per-fold metrics.
    pub mean: Metrics,
    /// Sample standard deviation of the per-fold metrics.
    pub std: Metrics,
    /// Metrics of the confusion pooled over all folds.
    pub pooled: Metrics,
    /// Unweighted mean over labels of the pooled per-label metrics.
    #[serde(rename = "macro")]
    pub macro_avg: Metrics,
    pub per_label: Vec<LabelResult>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// ShuffleSplit cross-validation of the TF-IDF + forest pipeline. Folds run in
/// parallel; results are collected in fold order.
pub fn cross_validate(dataset: &Dataset, mode: Mode, config: &EvalConfig) -> Result<EvaluationReport, EvalError> {
    let data = prepare(dataset, config);
    if data.labels.is_empty() {
        return Err(EvalError::NoUsableLabels {
            dropped: data.dropped_labels.len(),
        });
    }
    let plan = shuffle_split(dataset.len(), &config.split)?;
    let outcomes: Vec<FoldOutcome> = plan
        .folds
        .par_iter()
        .map(|fold| evaluate_fold(&data, fold, config))
        .collect::<Result<_, _>>()?;

    let mut pooled = Confusion::default();
    let mut label_pooled = vec![Confusion::default(); data.labels.len()];
    let mut per_fold = Vec::with_capacity(outcomes.len());
    for (fold, out) in plan.folds.iter().zip(&outcomes) {
        let per_label = per_label_confusion(&out.y_true, &out.y_pred)?;
        let mut c = Confusion::default();
        for (acc, pl) in label_pooled.iter_mut().zip(&per_label) {
            acc.add(pl);
            c.add(pl);
        }
        pooled.add(&c);
        per_fold.push(FoldResult {
            n_train: fold.train.len(),
            n_test: fold.test.len(),
            confusion: c,
            metrics: c.metrics(),
        });
    }
    let fold_metrics: Vec<Metrics> = per_fold.iter().map(|f| f.metrics).collect();
    let per_label = data
        .labels
        .iter()
        .zip(&label_pooled)
        .map(|(label, c)| LabelResult {
            label: label.clone(),
            support: c.tp + c.fn_,
            confusion: *c,
            metrics: c.metrics(),
        })
        .collect();
    Ok(EvaluationReport {
        model: "tfidf".to_string(),
        mode,
        project: dataset.project.clone(),
        n_examples: dataset.len(),
        label_universe: data.labels.clone(),
        dropped_labels: data.dropped_labels.clone(),
        split: config.split,
        hyperparams: config.hyperparams.clone(),
        min_df: config.min_df,
        threshold: config.threshold,
        mean: mean(&fold_metrics),
        std: sample_std(&fold_metrics),
        pooled: pooled.metrics(),
        macro_avg: macro_metrics(&label_pooled),
        per_fold,
        per_label,
    })
}

/// Aligned text table with one row per report: model, mode, project, then
/// fold-mean precision, recall, F-measure and Hamming loss.
pub fn render_table(reports: &[EvaluationReport]) -> String {
    let header = ["Model", "Mode", "Project", "Precision", "Recall", "F-measure", "Hla"];
    let rows: Vec<[String; 7]> = reports
        .iter()
        .map(|r| {
            [
                r.model.to_uppercase().replace("TFIDF", "TF-IDF"),
                r.mode.to_string(),
                r.project
                    .as_ref()
                    .map_or_else(|| "(all)".to_string(), |p| p.display_label.clone()),
                format!("{:.3}", r.mean.precision),
                format!("{:.3}", r.mean.recall),
                format!("{:.3}", r.mean.f_measure),
                format!("{:.3}", r.mean.hamming_loss),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[&str]| {
        cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 3 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&header);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        out.push_str(&line(&cells));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Example;

    fn example(number: u64, title: &str, labels: &[&str]) -> Example {
        Example {
            number,
            title: title.to_string(),
            body: String::new(),
            url: String::new(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn constant_task_is_perfect() {
        let d = Dataset {
            project: None,
            label_universe: vec!["DB".into()],
            examples: (1..=10).map(|n| example(n, "database query fails", &["DB"])).collect(),
        };
        let r = cross_validate(&d, Mode::OneProject, &EvalConfig::default()).unwrap();
        assert_eq!(r.per_fold.len(), 10);
        assert_eq!(
            (r.mean.precision, r.mean.recall, r.mean.f_measure, r.mean.hamming_loss),
            (1.0, 1.0, 1.0, 0.0)
        );
    }

    #[test]
    fn rare_labels_dropped() {
        let mut examples: Vec<Example> = (1..=20).map(|n| example(n, "database query", &["DB"])).collect();
        examples[0].labels.insert("UI".into());
        let d = Dataset {
            project: None,
            label_universe: vec!["DB".into(), "UI".into()],
            examples,
        };
        let r = cross_validate(&d, Mode::OneProject, &EvalConfig::default()).unwrap();
        assert_eq!(r.dropped_labels, vec!["UI".to_string()]);
        assert_eq!(r.label_universe, vec!["DB".to_string()]);
    }

    #[test]
    fn no_usable_labels() {
        let d = Dataset {
            project: None,
            label_universe: vec!["DB".into()],
            examples: (1..=10).map(|n| example(n, "x", &[])).collect(),
        };
        assert!(matches!(
            cross_validate(&d, Mode::OneProject, &EvalConfig::default()),
            Err(EvalError::NoUsableLabels { dropped: 1 })
        ));
    }

    #[test]
    fn table_layout() {
        let d = Dataset {
            project: Some(ProjectRef::new("o", "n", "JabRef")),
            label_universe: vec!["DB".into()],
            examples: (1..=10).map(|n| example(n, "database query fails", &["DB"])).collect(),
        };
        let r = cross_validate(&d, Mode::OneProject, &EvalConfig::default()).unwrap();
        let t = render_table(&[r]);
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].starts_with("Model"));
        assert!(lines[2].starts_with("TF-IDF  One   JabRef"), "{t}");
        assert!(lines[2].ends_with("0.000"));
    }
}
