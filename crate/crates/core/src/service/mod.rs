//! Classification store, skill queries, the daily scheduler and the HTTP API.

mod config;
mod http;
mod scheduler;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::forest::ForestModel;
use crate::miner::{load_snapshot, GithubClient, Issue, ProjectRef, Timestamp};
use crate::text::TfidfModel;

pub use config::{ProjectConfig, ServeConfig};
pub use http::{router, serve, AppState, OPERATOR_TOKEN_ENV};
pub use scheduler::{Job, JobStatus, RunStatus, Scheduler};
pub use store::{ProjectRow, Store};

pub const TFIDF_FILE: &str = "tfidf.json";
pub const FOREST_FILE: &str = "forest.json";
/// The only model family served.
pub const MODEL_TFIDF: &str = "tfidf";
pub const DEFAULT_RESULT_CAP: usize = 200;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown project {0:?}")]
    UnknownProject(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("unsupported model {0:?} (only \"tfidf\" is available)")]
    UnsupportedModel(String),
    #[error("at least one label is required")]
    EmptyLabels,
    #[error("missing query parameter {0:?}")]
    MissingParameter(String),
    #[error("project {0:?} is already registered")]
    DuplicateProject(String),
    #[error("model file missing: {0}")]
    ModelMissing(String),
    #[error("model schema violation: {0}")]
    ModelSchemaViolation(String),
    #[error("store unavailable: {0}")]
    StoreUnavailable(String),
    #[error("cannot read open issues: {0}")]
    Source(String),
    #[error("classification failed: {0}")]
    Classification(String),
    #[error("invalid service configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedIssue {
    /// Display label of the project.
    pub project: String,
    pub number: u64,
    pub title: String,
    pub body: String,
    pub url: String,
    pub labels: BTreeSet<String>,
    pub model_id: String,
    pub classified_at: Timestamp,
}

/// A trained TF-IDF vectorizer and forest pair plus the decision threshold.
#[derive(Debug, Clone)]
pub struct ProjectModels {
    pub tfidf: TfidfModel,
    pub forest: ForestModel,
    pub threshold: f64,
}

impl ProjectModels {
    pub fn new(tfidf: TfidfModel, forest: ForestModel, threshold: f64) -> Result<Self, ServiceError> {
        if tfidf.dim() != forest.feature_dim() {
            return Err(ServiceError::ModelSchemaViolation(format!(
                "vocabulary size {} does not match forest feature_dim {}",
                tfidf.dim(),
                forest.feature_dim()
            )));
        }
        Ok(Self {
            tfidf,
            forest,
            threshold,
        })
    }

    /// Read `tfidf.json` and `forest.json` from `dir`.
    pub fn load(dir: &Path, threshold: f64) -> Result<Self, ServiceError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read(&path).map_err(|_| ServiceError::ModelMissing(path.display().to_string()))
        };
        let tfidf_bytes = read(TFIDF_FILE)?;
        let forest_bytes = read(FOREST_FILE)?;
        let tfidf = TfidfModel::from_json(&String::from_utf8_lossy(&tfidf_bytes))
            .map_err(|e| ServiceError::ModelSchemaViolation(format!("{TFIDF_FILE}: {e}")))?;
        let forest = ForestModel::from_bytes(&forest_bytes)
            .map_err(|e| ServiceError::ModelSchemaViolation(format!("{FOREST_FILE}: {e}")))?;
        Self::new(tfidf, forest, threshold)
    }

    pub fn save(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(TFIDF_FILE), self.tfidf.to_json())?;
        std::fs::write(dir.join(FOREST_FILE), self.forest.to_bytes())
    }

    /// `tfidf:` followed by the first 12 hex digits of the SHA-256 of both model files.
    pub fn model_id(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.tfidf.to_json().as_bytes());
        h.update(self.forest.to_bytes());
        let hex: String = h.finalize().iter().take(6).map(|b| format!("{b:02x}")).collect();
        format!("{MODEL_TFIDF}:{hex}")
    }

    pub fn label_universe(&self) -> &[String] {
        self.forest.label_universe()
    }

    /// preprocess(title, body) -> transform -> predict.
    pub fn classify(&self, title: &str, body: &str) -> Result<BTreeSet<String>, ServiceError> {
        let x = self.tfidf.transform_text(title, body);
        let p = self
            .forest
            .predict(&x, self.threshold)
            .map_err(|e| ServiceError::Classification(e.to_string()))?;
        Ok(p.labels.into_iter().collect())
    }
}

/// Where a project's currently open issues come from.
#[derive(Clone)]
pub enum IssueSource {
    /// The latest saved snapshot, re-read on every run.
    Snapshot(PathBuf),
    Live(GithubClient),
    /// Issues held in memory; replace the contents to simulate tracker changes.
    Memory(Arc<RwLock<Vec<Issue>>>),
}

impl IssueSource {
    pub fn memory(issues: Vec<Issue>) -> Self {
        IssueSource::Memory(Arc::new(RwLock::new(issues)))
    }

    pub fn open_issues(&self, project: &ProjectRef) -> Result<Vec<Issue>, ServiceError> {
        let all = match self {
            IssueSource::Snapshot(path) => {
                load_snapshot(path)
                    .map_err(|e| ServiceError::Source(e.to_string()))?
                    .issues
            }
            IssueSource::Live(client) => client
                .fetch_issues(project)
                .map_err(|e| ServiceError::Source(e.to_string()))?,
            IssueSource::Memory(issues) => issues
                .read()
                .map_err(|_| ServiceError::Source("issue list lock poisoned".into()))?
                .clone(),
        };
        Ok(all.into_iter().filter(Issue::is_open).collect())
    }
}

pub struct RegisteredProject {
    pub project: ProjectRef,
    pub models: ProjectModels,
    pub model_id: String,
    pub source: IssueSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectInfo {
    pub display_label: String,
    pub owner: String,
    pub name: String,
    pub label_universe: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub project: String,
    pub labels: Vec<String>,
    pub model: String,
}

impl QueryRequest {
    pub fn new<I, S>(project: &str, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            project: project.to_string(),
            labels: labels.into_iter().map(Into::into).collect(),
            model: MODEL_TFIDF.to_string(),
        }
    }

    /// Labels from a comma-separated list; blank entries are ignored.
    pub fn parse_labels(list: &str) -> Vec<String> {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryItem {
    pub url: String,
    pub title: String,
    pub number: u64,
    pub matched_labels: Vec<String>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub project: String,
    pub model: String,
    pub model_id: String,
    /// Matching issues before the result cap was applied.
    pub total: usize,
    pub items: Vec<QueryItem>,
}

/// Registered projects, their models, and the store they classify into.
pub struct Service {
    store: Arc<Store>,
    projects: RwLock<BTreeMap<String, Arc<RegisteredProject>>>,
    result_cap: usize,
}

impl Service {
    pub fn new(store: Arc<Store>) -> Self {
        Self {
            store,
            projects: RwLock::new(BTreeMap::new()),
            result_cap: DEFAULT_RESULT_CAP,
        }
    }

    pub fn with_result_cap(mut self, cap: usize) -> Self {
        self.result_cap = cap.max(1);
        self
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn register_project(
        &self,
        project: ProjectRef,
        models: ProjectModels,
        source: IssueSource,
    ) -> Result<(), ServiceError> {
        let mut projects = self.projects.write().expect("registry lock");
        if projects.contains_key(&project.display_label) {
            return Err(ServiceError::DuplicateProject(project.display_label));
        }
        let model_id = models.model_id();
        self.store.upsert_project(&ProjectRow {
            project: project.clone(),
            label_universe: models.label_universe().to_vec(),
            model_id: model_id.clone(),
        })?;
        tracing::info!(project = %project.display_label, %model_id, "registered project");
        projects.insert(
            project.display_label.clone(),
            Arc::new(RegisteredProject {
                project,
                models,
                model_id,
                source,
            }),
        );
        Ok(())
    }

    pub fn project(&self, display_label: &str) -> Result<Arc<RegisteredProject>, ServiceError> {
        self.projects
            .read()
            .expect("registry lock")
            .get(display_label)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownProject(display_label.to_string()))
    }

    pub fn project_labels(&self) -> Vec<String> {
        self.projects.read().expect("registry lock").keys().cloned().collect()
    }

    pub fn catalog(&self) -> Vec<ProjectInfo> {
        self.projects
            .read()
            .expect("registry lock")
            .values()
            .map(|p| ProjectInfo {
                display_label: p.project.display_label.clone(),
                owner: p.project.owner.clone(),
                name: p.project.name.clone(),
                label_universe: p.models.label_universe().to_vec(),
            })
            .collect()
    }

    /// Fetch the project's open issues from its source and classify them.
    pub fn classify_open_issues(&self, display_label: &str) -> Result<usize, ServiceError> {
        let p = self.project(display_label)?;
        let open = p.source.open_issues(&p.project)?;
        self.classify_issues(display_label, &open)
    }

    /// Classify `issues` (closed ones are ignored) and make them the project's
    /// entire stored set in one atomic batch. Returns the number of rows written.
    pub fn classify_issues(&self, display_label: &str, issues: &[Issue]) -> Result<usize, ServiceError> {
        let p = self.project(display_label)?;
        let now = Timestamp::now();
        let rows = issues
            .iter()
            .filter(|i| i.is_open())
            .map(|i| {
                Ok(ClassifiedIssue {
                    project: display_label.to_string(),
                    number: i.number,
                    title: i.title.clone(),
                    body: i.body.clone(),
                    url: i.url.clone(),
                    labels: p.models.classify(&i.title, &i.body)?,
                    model_id: p.model_id.clone(),
                    classified_at: now,
                })
            })
            .collect::<Result<Vec<_>, ServiceError>>()?;
        let n = self.store.replace_issues(display_label, &rows)?;
        tracing::info!(project = display_label, rows = n, "classified open issues");
        Ok(n)
    }

    /// Stored issues sharing at least one label with the request, by matched
    /// label count (descending) then issue number.
    pub fn query(&self, req: &QueryRequest) -> Result<QueryResponse, ServiceError> {
        let p = self.project(&req.project)?;
        if req.model != MODEL_TFIDF {
            return Err(ServiceError::UnsupportedModel(req.model.clone()));
        }
        if req.labels.is_empty() {
            return Err(ServiceError::EmptyLabels);
        }
        let universe = p.models.label_universe();
        if let Some(bad) = req.labels.iter().find(|l| !universe.contains(l)) {
            return Err(ServiceError::UnknownLabel(bad.clone()));
        }
        let wanted: BTreeSet<&str> = req.labels.iter().map(String::as_str).collect();
        let in_universe_order = |set: &BTreeSet<String>, only: Option<&BTreeSet<&str>>| -> Vec<String> {
            universe
                .iter()
                .filter(|l| set.contains(*l) && only.is_none_or(|w| w.contains(l.as_str())))
                .cloned()
                .collect()
        };
        let mut items: Vec<QueryItem> = self
            .store
            .issues(&req.project, &p.model_id)?
            .into_iter()
            .filter_map(|row| {
                let matched = in_universe_order(&row.labels, Some(&wanted));
                (!matched.is_empty()).then(|| QueryItem {
                    url: row.url,
                    title: row.title,
                    number: row.number,
                    labels: in_universe_order(&row.labels, None),
                    matched_labels: matched,
                })
            })
            .collect();
        items.sort_by(|a, b| {
            b.matched_labels
                .len()
                .cmp(&a.matched_labels.len())
                .then(a.number.cmp(&b.number))
        });
        let total = items.len();
        items.truncate(self.result_cap);
        Ok(QueryResponse {
            project: req.project.clone(),
            model: MODEL_TFIDF.to_string(),
            model_id: p.model_id.clone(),
            total,
            items,
        })
    }

    /// One scheduler job per registered project, each running
    /// [`Service::classify_open_issues`].
    pub fn scheduler(self: &Arc<Self>) -> Scheduler {
        let scheduler = Scheduler::new();
        for label in self.project_labels() {
            let service = Arc::clone(self);
            let name = label.clone();
            scheduler.add_job(
                &label,
                Arc::new(move || service.classify_open_issues(&name).map_err(|e| e.to_string())),
            );
        }
        scheduler
    }
}
