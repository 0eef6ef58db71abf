//! Binary-relevance random forests: one forest of entropy-split trees per label.
//!
//! Every random draw comes from [`SplitMix64`](crate::rng::SplitMix64). Tree
//! `t` of label `l` is seeded with [`tree_seed`]; it first draws the bootstrap
//! sample (`n` calls to `below(n)`), then grows depth-first, left child before
//! right. At each node the candidate pool is the ascending list of features
//! with a non-zero value among the node's samples; features are drawn from the
//! pool by a partial Fisher-Yates pass (`j = i + below(len - i)`) until
//! `features_per_split` non-constant features have been scanned or the pool is
//! exhausted. Constant features do not count against the budget.

mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{fnv1a, mix64, SplitMix64};
use crate::text::FeatureVector;

pub use tree::{binary_entropy, information_gain, midpoint, DecisionTree, Node, GAIN_EPSILON};

pub const FOREST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ForestError {
    #[error("label {0:?} is constant in the training data")]
    DegenerateLabel(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least 2 training samples, got {0}")]
    TooFewSamples(usize),
    #[error("label matrix has {found} columns but {expected} labels were given")]
    LabelCountMismatch { expected: usize, found: usize },
    #[error("forest model schema violation: {0}")]
    Schema(String),
    #[error("forest model schema version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Entropy,
}

/// How many non-constant features to scan per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))`
    Sqrt,
    All,
    Fixed(usize),
}

impl MaxFeatures {
    pub fn resolve(self, dim: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => {
                let mut k = (dim as f64).sqrt() as usize;
                while k * k < dim {
                    k += 1;
                }
                while k > 0 && (k - 1) * (k - 1) >= dim {
                    k -= 1;
                }
                k.max(1)
            }
            MaxFeatures::All => dim.max(1),
            MaxFeatures::Fixed(k) => k.clamp(1, dim.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestHyperparams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub criterion: Criterion,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestHyperparams {
    fn default() -> Self {
        Self {
            n_estimators: 50,
            max_depth: 50,
            min_samples_split: 3,
            min_samples_leaf: 1,
            criterion: Criterion::Entropy,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Seed for tree `tree_index` of `label`.
pub fn tree_seed(seed: u64, label: &str, tree_index: usize) -> u64 {
    seed ^ mix64(fnv1a(label.as_bytes()).wrapping_add(mix64(tree_index as u64)))
}

/// The bootstrap rows tree `tree_index` of `label` trains on.
pub fn bootstrap_indices(seed: u64, label: &str, tree_index: usize, n: usize) -> Vec<usize> {
    let mut rng = SplitMix64::new(tree_seed(seed, label, tree_index));
    tree::bootstrap(&mut rng, n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelPrediction {
    /// Vote fraction per label, in label-universe order.
    pub scores: Vec<(String, f64)>,
    /// Labels whose score reaches the threshold, in label-universe order.
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    label_universe: Vec<String>,
    forests: Vec<Vec<DecisionTree>>,
    hyperparams: ForestHyperparams,
    feature_dim: usize,
}

impl ForestModel {
    /// Train one forest per label column of `y` (rows are samples).
    pub fn train(
        x: &[FeatureVector],
        y: &[Vec<bool>],
        labels: &[String],
        hp: &ForestHyperparams,
    ) -> Result<Self, ForestError> {
        let n = x.len();
        if n < 2 {
            return Err(ForestError::TooFewSamples(n));
        }
        if y.len() != n {
            return Err(ForestError::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        let feature_dim = x[0].dim;
        if let Some(bad) = x.iter().find(|v| v.dim != feature_dim) {
            return Err(ForestError::DimensionMismatch {
                expected: feature_dim,
                found: bad.dim,
            });
        }
        if let Some(row) = y.iter().find(|r| r.len() != labels.len()) {
            return Err(ForestError::LabelCountMismatch {
                expected: labels.len(),
                found: row.len(),
            });
        }
        let columns: Vec<Vec<bool>> = (0..labels.len())
            .map(|l| y.iter().map(|row| row[l]).collect())
            .collect();
        for (l, col) in columns.iter().enumerate() {
            let pos = col.iter().filter(|&&b| b).count();
            if pos == 0 || pos == n {
                return Err(ForestError::DegenerateLabel(labels[l].clone()));
            }
        }

        let csc = tree::Columns::new(x);
        let jobs: Vec<(usize, usize)> = (0..labels.len())
            .flat_map(|l| (0..hp.n_estimators).map(move |t| (l, t)))
            .collect();
        let trees: Vec<DecisionTree> = jobs
            .par_iter()
            .map(|&(l, t)| {
                let mut rng = SplitMix64::new(tree_seed(hp.seed, &labels[l], t));
                let samples = if hp.bootstrap {
                    tree::bootstrap(&mut rng, n)
                } else {
                    (0..n).collect()
                };
                tree::grow(x, &csc, &columns[l], hp, rng, samples)
            })
            .collect();

        let mut forests: Vec<Vec<DecisionTree>> = vec![Vec::new(); labels.len()];
        for ((l, _), tree) in jobs.into_iter().zip(trees) {
            forests[l].push(tree);
        }
        Ok(Self {
            label_universe: labels.to_vec(),
            forests,
            hyperparams: hp.clone(),
            feature_dim,
        })
    }

    /// Mean leaf positive fraction per label.
    pub fn scores(&self, x: &FeatureVector) -> Result<Vec<f64>, ForestError> {
        if x.dim != self.feature_dim {
            return Err(ForestError::DimensionMismatch {
                expected: self.feature_dim,
                found: x.dim,
            });
        }
        Ok(self
            .forests
            .iter()
            .map(|trees| {
                if trees.is_empty() {
                    0.0
                } else {
                    trees.iter().map(|t| t.predict(x)).sum::<f64>() / trees.len() as f64
                }
            })
            .collect())
    }

    pub fn predict(&self, x: &FeatureVector, threshold: f64) -> Result<LabelPrediction, ForestError> {
        let scores = self.scores(x)?;
        let labels = self
            .label_universe
            .iter()
            .zip(&scores)
            .filter(|(_, &s)| s >= threshold)
            .map(|(l, _)| l.clone())
            .collect();
        Ok(LabelPrediction {
            scores: self.label_universe.iter().cloned().zip(scores).collect(),
            labels,
        })
    }

    /// Binary prediction row in label-universe order.
    pub fn predict_row(&self, x: &FeatureVector, threshold: f64) -> Result<Vec<bool>, ForestError> {
        Ok(self.scores(x)?.into_iter().map(|s| s >= threshold).collect())
    }

    pub fn label_universe(&self) -> &[String] {
        &self.label_universe
    }

    pub fn hyperparams(&self) -> &ForestHyperparams {
        &self.hyperparams
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn trees(&self, label: &str) -> Option<&[DecisionTree]> {
        let i = self.label_universe.iter().position(|l| l == label)?;
        Some(&self.forests[i])
    }

    pub fn node_count(&self) -> usize {
        self.forests.iter().flatten().map(|t| t.nodes.len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let file = ForestFileRef {
            schema_version: FOREST_SCHEMA_VERSION,
            hyperparams: &self.hyperparams,
            label_universe: &self.label_universe,
            feature_dim: self.feature_dim,
            forests: self
                .label_universe
                .iter()
                .zip(&self.forests)
                .map(|(label, trees)| LabelForestRef { label, trees })
                .collect(),
        };
        serde_json::to_vec(&file).expect("forest model serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ForestError> {
        let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| ForestError::Schema(e.to_string()))?;
        let version = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ForestError::Schema("missing schema_version".into()))?;
        if version != FOREST_SCHEMA_VERSION as u64 {
            return Err(ForestError::VersionMismatch {
                found: version as u32,
                expected: FOREST_SCHEMA_VERSION,
            });
        }
        let file: ForestFile = serde_json::from_value(value).map_err(|e| ForestError::Schema(e.to_string()))?;
        if file.forests.len() != file.label_universe.len() {
            return Err(ForestError::Schema("one forest per label is required".into()));
        }
        let mut forests = Vec::with_capacity(file.forests.len());
        for (label, forest) in file.label_universe.iter().zip(file.forests) {
            if &forest.label != label {
                return Err(ForestError::Schema(format!(
                    "forest for {:?} found where {label:?} was expected",
                    forest.label
                )));
            }
            if forest.trees.len() != file.hyperparams.n_estimators {
                return Err(ForestError::Schema(format!(
                    "label {label:?} has {} trees, expected {}",
                    forest.trees.len(),
                    file.hyperparams.n_estimators
                )));
            }
            for t in &forest.trees {
                t.validate(file.feature_dim)
                    .map_err(|e| ForestError::Schema(format!("label {label:?}: {e}")))?;
            }
            forests.push(forest.trees);
        }
        Ok(Self {
            label_universe: file.label_universe,
            forests,
            hyperparams: file.hyperparams,
            feature_dim: file.feature_dim,
        })
    }
}

#[derive(Serialize)]
struct ForestFileRef<'a> {
    schema_version: u32,
    hyperparams: &'a ForestHyperparams,
    label_universe: &'a [String],
    feature_dim: usize,
    forests: Vec<LabelForestRef<'a>>,
}

#[derive(Serialize)]
struct LabelForestRef<'a> {
    label: &'a str,
    trees: &'a [DecisionTree],
}

#[derive(Deserialize)]
struct ForestFile {
    #[allow(dead_code)]
    schema_version: u32,
    hyperparams: ForestHyperparams,
    label_universe: Vec<String>,
    feature_dim: usize,
    forests: Vec<LabelForest>,
}

#[derive(Deserialize)]
struct LabelForest {
    label: String,
    trees: Vec<DecisionTree>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn toy() -> (Vec<FeatureVector>, Vec<Vec<bool>>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let a = (i % 2) as f64;
            let b = ((i / 2) % 2) as f64;
            x.push(FeatureVector::from_dense(&[a, b, (i % 5) as f64 / 5.0]));
            y.push(vec![a > 0.0, b > 0.0]);
        }
        (x, y)
    }

    #[test]
    fn sqrt_budget() {
        assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
        assert_eq!(MaxFeatures::Sqrt.resolve(4), 2);
        assert_eq!(MaxFeatures::Sqrt.resolve(5), 3);
        assert_eq!(MaxFeatures::Sqrt.resolve(10_000), 100);
        assert_eq!(MaxFeatures::Sqrt.resolve(10_001), 101);
        assert_eq!(MaxFeatures::Fixed(7).resolve(3), 3);
    }

    #[test]
    fn degenerate_column_rejected() {
        let (x, mut y) = toy();
        for row in &mut y {
            row[1] = true;
        }
        let err = ForestModel::train(&x, &y, &labels(&["A", "B"]), &ForestHyperparams::default()).unwrap_err();
        assert!(matches!(err, ForestError::DegenerateLabel(ref l) if l == "B"));
    }

    #[test]
    fn dimension_checks() {
        let (x, y) = toy();
        let model = ForestModel::train(
            &x,
            &y,
            &labels(&["A", "B"]),
            &ForestHyperparams {
                n_estimators: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(
            model.predict(&FeatureVector::zeros(2), 0.5),
            Err(ForestError::DimensionMismatch { expected: 3, found: 2 })
        ));
        assert!(matches!(
            ForestModel::train(&x[..1], &y[..1], &labels(&["A", "B"]), &ForestHyperparams::default()),
            Err(ForestError::TooFewSamples(1))
        ));
    }

    #[test]
    fn learns_toy_labels_and_round_trips() {
        let (x, y) = toy();
        let hp = ForestHyperparams {
            n_estimators: 10,
            seed: 11,
            ..Default::default()
        };
        let model = ForestModel::train(&x, &y, &labels(&["A", "B"]), &hp).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(&model.predict_row(xi, 0.5).unwrap(), yi);
        }
        let bytes = model.to_bytes();
        let back = ForestModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn threshold_above_one_yields_nothing() {
        let (x, y) = toy();
        let model = ForestModel::train(
            &x,
            &y,
            &labels(&["A", "B"]),
            &ForestHyperparams {
                n_estimators: 5,
                ..Default::default()
            },
        )
        .unwrap();
        for xi in &x {
            assert!(model.predict(xi, 1.01).unwrap().labels.is_empty());
        }
    }

    #[test]
    fn truncated_and_wrong_version() {
        let (x, y) = toy();
        let model = ForestModel::train(
            &x,
            &y,
            &labels(&["A", "B"]),
            &ForestHyperparams {
                n_estimators: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let bytes = model.to_bytes();
        assert!(matches!(
            ForestModel::from_bytes(&bytes[..bytes.len() - 10]),
            Err(ForestError::Schema(_))
        ));
        let text = String::from_utf8(bytes)
            .unwrap()
            .replacen("\"schema_version\":1", "\"schema_version\":2", 1);
        assert!(matches!(
            ForestModel::from_bytes(text.as_bytes()),
            Err(ForestError::VersionMismatch { found: 2, .. })
        ));
    }

    #[test]
    fn tree_seeds_differ_per_label_and_tree() {
        let a = tree_seed(1, "UI", 0);
        assert_ne!(a, tree_seed(1, "UI", 1));
        assert_ne!(a, tree_seed(1, "DB", 0));
        assert_ne!(a, tree_seed(2, "UI", 0));
        assert_ne!(bootstrap_indices(1, "UI", 0, 50), bootstrap_indices(2, "UI", 0, 50));
    }
}
