use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use super::{IssueSource, ProjectModels, Service, ServiceError, Store, DEFAULT_RESULT_CAP};
use crate::miner::{Auth, GithubClient, ProjectRef};

/// `serve` configuration file (JSON). Relative paths resolve against the
/// directory holding the file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ServeConfig {
    pub database: PathBuf,
    #[serde(default = "default_cap")]
    pub result_cap: usize,
    pub projects: Vec<ProjectConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ProjectConfig {
    pub owner: String,
    pub name: String,
    pub display_label: String,
    /// Directory holding `tfidf.json` and `forest.json`.
    pub model_dir: PathBuf,
    /// Used when no API token is available.
    #[serde(default)]
    pub snapshot: Option<PathBuf>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_cap() -> usize {
    DEFAULT_RESULT_CAP
}

fn default_threshold() -> f64 {
    0.5
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ServeConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ServiceError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let cfg: ServeConfig =
            serde_json::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    /// Open the store and register every project. Open issues are fetched
    /// live when `auth` carries a token, otherwise read from the snapshot.
    pub fn build(&self, base: &Path, auth: &Auth) -> Result<Arc<Service>, ServiceError> {
        let store = Arc::new(Store::open(&resolve(base, &self.database))?);
        let service = Service::new(store).with_result_cap(self.result_cap);
        for p in &self.projects {
            let models = ProjectModels::load(&resolve(base, &p.model_dir), p.threshold)?;
            let source = match (auth, &p.snapshot) {
                (Auth::Token(_), _) => IssueSource::Live(
                    GithubClient::live(auth.clone()).map_err(|e| ServiceError::Config(e.to_string()))?,
                ),
                (Auth::Anonymous, Some(snap)) => IssueSource::Snapshot(resolve(base, snap)),
                (Auth::Anonymous, None) => {
                    return Err(ServiceError::Config(format!(
                        "project {:?} needs a snapshot when no API token is set",
                        p.display_label
                    )))
                }
            };
            service.register_project(ProjectRef::new(&p.owner, &p.name, &p.display_label), models, source)?;
        }
        Ok(Arc::new(service))
    }
}
