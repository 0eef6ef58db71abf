use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::clean::CleaningConfig;
use super::TextError;

pub const TFIDF_SCHEMA_VERSION: u32 = 1;

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Build from unsorted pairs; duplicate indices are summed and zeros dropped.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, w) in pairs {
            assert!(i < dim, "index {i} out of range for dimension {dim}");
            *acc.entry(i).or_insert(0.0) += w;
        }
        Self {
            dim,
            entries: acc.into_iter().filter(|&(_, w)| w != 0.0).collect(),
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self {
            dim: values.len(),
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i, v))
                .collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            out[i] = w;
        }
        out
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Fitted TF-IDF vectorizer.
///
/// `idf[t] = ln((1 + n_docs) / (1 + df_t)) + 1`; vectors are raw counts times
/// idf, L2-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocabulary: BTreeMap<String, usize>,
    terms: Vec<String>,
    idf: Vec<f64>,
    n_docs: usize,
    min_df: usize,
    config: CleaningConfig,
}

impl TfidfModel {
    /// Fit on pre-tokenized documents.
    pub fn fit<D, T>(docs: D, min_df: usize, config: CleaningConfig) -> Result<Self, TextError>
    where
        D: IntoIterator<Item = T>,
        T: AsRef<[String]>,
    {
        let min_df = min_df.max(1);
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        let docs: Vec<T> = docs.into_iter().collect();
        if docs.is_empty() {
            return Err(TextError::NoDocuments);
        }
        for doc in &docs {
            let mut seen: Vec<&str> = doc.as_ref().iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let n_docs = docs.len();
        let mut terms = Vec::new();
        let mut idf = Vec::new();
        for (term, count) in df {
            if count >= min_df {
                terms.push(term.to_string());
                idf.push(smoothed_idf(n_docs, count));
            }
        }
        if terms.is_empty() {
            return Err(TextError::EmptyVocabulary { min_df });
        }
        let vocabulary = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self {
            vocabulary,
            terms,
            idf,
            n_docs,
            min_df,
            config,
        })
    }

    pub fn transform(&self, tokens: &[String]) -> FeatureVector {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for t in tokens {
            if let Some(&i) = self.vocabulary.get(t) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let mut entries: Vec<(usize, f64)> = counts.into_iter().map(|(i, c)| (i, c as f64 * self.idf[i])).collect();
        entries.sort_unstable_by_key(|&(i, _)| i);
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        FeatureVector {
            dim: self.terms.len(),
            entries,
        }
    }

    /// Preprocess raw title/body with this model's cleaning config, then transform.
    pub fn transform_text(&self, title: &str, body: &str) -> FeatureVector {
        self.transform(&super::preprocess(title, body, &self.config))
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    /// Terms in column order.
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&i| self.idf[i])
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn min_df(&self) -> usize {
        self.min_df
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn config(&self) -> &CleaningConfig {
        &self.config
    }

    pub fn to_json(&self) -> String {
        let file = TfidfFile {
            schema_version: TFIDF_SCHEMA_VERSION,
            vocabulary: self.terms.clone(),
            idf: self.idf.clone(),
            n_docs: self.n_docs,
            min_df: self.min_df,
            config_digest: self.config.digest(),
            config: self.config.clone(),
        };
        serde_json::to_string(&file).expect("tf-idf model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TextError> {
        let file: TfidfFile = serde_json::from_str(text).map_err(|e| TextError::Schema(e.to_string()))?;
        if file.schema_version != TFIDF_SCHEMA_VERSION {
            return Err(TextError::VersionMismatch {
                found: file.schema_version,
                expected: TFIDF_SCHEMA_VERSION,
            });
        }
        if file.vocabulary.len() != file.idf.len() {
            return Err(TextError::Schema(format!(
                "vocabulary has {} terms but idf has {} values",
                file.vocabulary.len(),
                file.idf.len()
            )));
        }
        if file.vocabulary.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TextError::Schema("vocabulary must be strictly increasing".into()));
        }
        if file.idf.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(TextError::Schema("idf values must be positive".into()));
        }
        if file.config.digest() != file.config_digest {
            return Err(TextError::Schema("config digest does not match config".into()));
        }
        let vocabulary = file
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Self {
            vocabulary,
            terms: file.vocabulary,
            idf: file.idf,
            n_docs: file.n_docs,
            min_df: file.min_df,
            config: file.config,
        })
    }
}

pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

#[derive(Serialize, Deserialize)]
struct TfidfFile {
    schema_version: u32,
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    n_docs: usize,
    min_df: usize,
    config_digest: String,
    config: CleaningConfig,
}
