//! Python bindings: `import gimli`.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use gimli::api::{extract_imports as extract, map_to_domains, ApiTaxonomy, Language};
use gimli::evaluation::{compute_metrics as metrics, shuffle_split as split, SplitParams};
use gimli::forest::{ForestHyperparams, ForestModel as Forest, MaxFeatures};
use gimli::miner::ProjectRef;
use gimli::text::{preprocess as clean, CleaningConfig, FeatureVector, TfidfModel as Tfidf};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn language(name: &str) -> PyResult<Language> {
    match name.to_ascii_lowercase().as_str() {
        "java" => Ok(Language::Java),
        "csharp" | "c#" | "cs" => Ok(Language::Csharp),
        "cpp" | "c++" => Ok(Language::Cpp),
        other => Language::from_path(other).ok_or_else(|| err(format!("unknown language {other:?}"))),
    }
}

/// Cleaned, stemmed tokens of an issue.
#[pyfunction]
#[pyo3(signature = (title, body, template_lines = Vec::new()))]
fn preprocess(title: &str, body: &str, template_lines: Vec<String>) -> Vec<String> {
    clean(
        title,
        body,
        &CleaningConfig::default().with_template_lines(template_lines),
    )
}

/// Qualified import names found in a source file. `language` is `java`,
/// `csharp`, `cpp`, or a file name whose extension identifies one.
#[pyfunction]
fn extract_imports(content: &str, language_or_path: &str) -> PyResult<Vec<String>> {
    let lang = language(language_or_path)?;
    Ok(extract(content, lang).into_iter().map(|i| i.qualified_name).collect())
}

/// API-domain labels of a source file. `taxonomy_csv` is a `prefix,label`
/// CSV; the built-in taxonomy is used when it is omitted.
#[pyfunction]
#[pyo3(signature = (content, language_or_path, taxonomy_csv = None))]
fn domain_labels(content: &str, language_or_path: &str, taxonomy_csv: Option<&str>) -> PyResult<Vec<String>> {
    let taxonomy = match taxonomy_csv {
        Some(text) => ApiTaxonomy::parse(text).map_err(err)?,
        None => ApiTaxonomy::reference(),
    };
    let imports = extract(content, language(language_or_path)?);
    Ok(map_to_domains(&imports, &taxonomy).into_iter().collect())
}

/// Issue numbers referenced by `text` in repository `owner/name`.
#[pyfunction]
fn extract_issue_refs(text: &str, owner: &str, name: &str) -> Vec<u64> {
    let project = ProjectRef::new(owner, name, name);
    gimli::links::extract_issue_refs(text, &project).into_iter().collect()
}

/// Micro-averaged precision, recall, F-measure and Hamming loss.
#[pyfunction]
fn compute_metrics(y_true: Vec<Vec<bool>>, y_pred: Vec<Vec<bool>>) -> PyResult<BTreeMap<&'static str, f64>> {
    let m = metrics(&y_true, &y_pred).map_err(err)?;
    Ok(BTreeMap::from([
        ("precision", m.precision),
        ("recall", m.recall),
        ("f_measure", m.f_measure),
        ("hamming_loss", m.hamming_loss),
    ]))
}

/// ShuffleSplit folds as a list of `(train, test)` index lists.
#[pyfunction]
#[pyo3(signature = (n, n_splits = 10, test_fraction = 0.1, seed = 0))]
fn shuffle_split(n: usize, n_splits: usize, test_fraction: f64, seed: u64) -> PyResult<Vec<(Vec<usize>, Vec<usize>)>> {
    let plan = split(
        n,
        &SplitParams {
            n_splits,
            test_fraction,
            seed,
        },
    )
    .map_err(err)?;
    Ok(plan.folds.into_iter().map(|f| (f.train, f.test)).collect())
}

#[pyclass(module = "gimli", frozen)]
struct TfidfModel {
    inner: Tfidf,
}

#[pymethods]
impl TfidfModel {
    /// Fit on token lists (see `preprocess`).
    #[staticmethod]
    #[pyo3(signature = (docs, min_df = 2))]
    fn fit(docs: Vec<Vec<String>>, min_df: usize) -> PyResult<Self> {
        let inner = Tfidf::fit(&docs, min_df, CleaningConfig::default()).map_err(err)?;
        Ok(Self { inner })
    }

    /// Dense, L2-normalised weights.
    fn transform(&self, tokens: Vec<String>) -> Vec<f64> {
        self.inner.transform(&tokens).to_dense()
    }

    fn transform_text(&self, title: &str, body: &str) -> Vec<f64> {
        self.inner.transform_text(title, body).to_dense()
    }

    #[getter]
    fn terms(&self) -> Vec<String> {
        self.inner.terms().to_vec()
    }

    #[getter]
    fn idf(&self) -> Vec<f64> {
        self.inner.idf().to_vec()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Tfidf::from_json(text).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.dim()
    }
}

#[pyclass(module = "gimli", frozen)]
struct ForestModel {
    inner: Forest,
}

fn rows(x: &[Vec<f64>]) -> Vec<FeatureVector> {
    x.iter().map(|r| FeatureVector::from_dense(r)).collect()
}

#[pymethods]
impl ForestModel {
    /// Train one random forest per label. `max_features` is `"sqrt"`,
    /// `"all"`, or an integer.
    #[staticmethod]
    #[pyo3(signature = (x, y, labels, n_estimators = 50, max_depth = 50, min_samples_split = 3,
                        min_samples_leaf = 1, max_features = None, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        x: Vec<Vec<f64>>,
        y: Vec<Vec<bool>>,
        labels: Vec<String>,
        n_estimators: usize,
        max_depth: usize,
        min_samples_split: usize,
        min_samples_leaf: usize,
        max_features: Option<Bound<'_, PyAny>>,
        seed: u64,
    ) -> PyResult<Self> {
        let max_features = match max_features {
            None => MaxFeatures::Sqrt,
            Some(v) => match v.extract::<usize>() {
                Ok(k) => MaxFeatures::Fixed(k),
                Err(_) => match v.extract::<String>()?.as_str() {
                    "sqrt" => MaxFeatures::Sqrt,
                    "all" => MaxFeatures::All,
                    other => return Err(err(format!("max_features {other:?}"))),
                },
            },
        };
        let hp = ForestHyperparams {
            n_estimators,
            max_depth,
            min_samples_split,
            min_samples_leaf,
            max_features,
            seed,
            ..ForestHyperparams::default()
        };
        let inner = Forest::train(&rows(&x), &y, &labels, &hp).map_err(err)?;
        Ok(Self { inner })
    }

    /// Per-label vote fractions.
    fn scores(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.scores(&FeatureVector::from_dense(&x)).map_err(err)
    }

    /// Labels whose score reaches `threshold`.
    #[pyo3(signature = (x, threshold = 0.5))]
    fn predict(&self, x: Vec<f64>, threshold: f64) -> PyResult<Vec<String>> {
        let p = self
            .inner
            .predict(&FeatureVector::from_dense(&x), threshold)
            .map_err(err)?;
        Ok(p.labels)
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.label_universe().to_vec()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes())
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: Forest::from_bytes(data).map_err(err)?,
        })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        std::fs::write(path, self.inner.to_bytes()).map_err(err)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(err)?)
    }
}

#[pymodule(name = "gimli")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(preprocess, m)?)?;
    m.add_function(wrap_pyfunction!(extract_imports, m)?)?;
    m.add_function(wrap_pyfunction!(domain_labels, m)?)?;
    m.add_function(wrap_pyfunction!(extract_issue_refs, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(shuffle_split, m)?)?;
    m.add_class::<TfidfModel>()?;
    m.add_class::<ForestModel>()?;
    Ok(())
}
