//! Labeled issue datasets as consumed by `train` and `evaluate`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::api::{ApiTaxonomy, LabeledIssue};
use crate::miner::ProjectRef;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub number: u64,
    pub title: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub url: String,
    pub labels: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    /// `None` for a combined multi-project dataset.
    pub project: Option<ProjectRef>,
    pub label_universe: Vec<String>,
    pub examples: Vec<Example>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed dataset: {0}")]
    Json(#[from] serde_json::Error),
    #[error("example #{number} has label {label:?} outside the label universe")]
    UnknownLabel { number: u64, label: String },
    #[error("label {0:?} appears twice in the label universe")]
    DuplicateLabel(String),
}

impl Dataset {
    /// Dataset from labeled issues; the universe keeps taxonomy order and
    /// contains only labels that occur.
    pub fn from_labeled(project: ProjectRef, issues: &[LabeledIssue], taxonomy: &ApiTaxonomy) -> Self {
        let seen: BTreeSet<&str> = issues
            .iter()
            .flat_map(|i| i.labels.iter().map(String::as_str))
            .collect();
        let label_universe = taxonomy
            .label_universe()
            .iter()
            .filter(|l| seen.contains(l.as_str()))
            .cloned()
            .collect();
        let examples = issues
            .iter()
            .map(|li| Example {
                number: li.issue.number,
                title: li.issue.title.clone(),
                body: li.issue.body.clone(),
                url: li.issue.url.clone(),
                labels: li.labels.clone(),
            })
            .collect();
        Self {
            project: Some(project),
            label_universe,
            examples,
        }
    }

    /// Concatenate per-project datasets; the universe is the union in first-seen order.
    pub fn combine(parts: &[Dataset]) -> Self {
        let mut label_universe: Vec<String> = Vec::new();
        for l in parts.iter().flat_map(|d| &d.label_universe) {
            if !label_universe.contains(l) {
                label_universe.push(l.clone());
            }
        }
        Self {
            project: None,
            label_universe,
            examples: parts.iter().flat_map(|d| d.examples.iter().cloned()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Row-major membership matrix over `labels`.
    pub fn label_matrix(&self, labels: &[String]) -> Vec<Vec<bool>> {
        self.examples
            .iter()
            .map(|e| labels.iter().map(|l| e.labels.contains(l)).collect())
            .collect()
    }

    /// Number of positive examples per universe label.
    pub fn label_counts(&self) -> BTreeMap<String, usize> {
        let mut counts: BTreeMap<String, usize> = self.label_universe.iter().map(|l| (l.clone(), 0)).collect();
        for l in self.examples.iter().flat_map(|e| &e.labels) {
            if let Some(c) = counts.get_mut(l) {
                *c += 1;
            }
        }
        counts
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut universe = BTreeSet::new();
        for l in &self.label_universe {
            if !universe.insert(l.as_str()) {
                return Err(DatasetError::DuplicateLabel(l.clone()));
            }
        }
        for e in &self.examples {
            if let Some(bad) = e.labels.iter().find(|l| !universe.contains(l.as_str())) {
                return Err(DatasetError::UnknownLabel {
                    number: e.number,
                    label: bad.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let d: Dataset = serde_json::from_str(text)?;
        d.validate()?;
        Ok(d)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        std::fs::write(path, self.to_json()).map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}
