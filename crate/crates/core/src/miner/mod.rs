//! Issue and pull-request records, offline snapshots, and the REST client that
//! produces them.

mod github;
mod schema;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, SubsecRound, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use github::{
    Auth, FixtureTransport, GithubClient, HttpResponse, HttpTransport, MinerError, RetryPolicy, Sleeper, Transport,
    TOKEN_ENV,
};
pub use schema::SchemaViolation;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProjectRef {
    pub owner: String,
    pub name: String,
    pub display_label: String,
}

impl ProjectRef {
    pub fn new(owner: impl Into<String>, name: impl Into<String>, display_label: impl Into<String>) -> Self {
        Self {
            owner: owner.into(),
            name: name.into(),
            display_label: display_label.into(),
        }
    }

    pub fn slug(&self) -> String {
        format!("{}/{}", self.owner, self.name)
    }
}

/// UTC timestamp with whole-second precision, serialized as `YYYY-MM-DDTHH:MM:SSZ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

impl Timestamp {
    pub fn now() -> Self {
        Self(Utc::now().trunc_subsecs(0))
    }

    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        Self(dt.trunc_subsecs(0))
    }

    /// Parse an RFC 3339 string; sub-second digits are truncated.
    pub fn parse(s: &str) -> Option<Self> {
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Some(Self::from_datetime(dt.with_timezone(&Utc)));
        }
        NaiveDateTime::parse_from_str(s, TS_FORMAT)
            .ok()
            .map(|n| Self(n.and_utc()))
    }

    pub fn datetime(&self) -> DateTime<Utc> {
        self.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format(TS_FORMAT))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Timestamp::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid timestamp {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueState {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub number: u64,
    pub title: String,
    #[serde(default)]
    pub body: String,
    pub state: IssueState,
    pub closed_at: Option<Timestamp>,
    pub url: String,
    #[serde(default)]
    pub comments: Vec<String>,
}

impl Issue {
    pub fn is_open(&self) -> bool {
        self.state == IssueState::Open
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRequest {
    pub number: u64,
    pub title: String,
    #[serde(default)]
    pub body: String,
    pub merged: bool,
    #[serde(default)]
    pub changed_files: Vec<String>,
    #[serde(default)]
    pub commit_messages: Vec<String>,
}

/// Everything mined for one project, persisted as a single JSON document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectSnapshot {
    pub project: ProjectRef,
    pub fetched_at: Timestamp,
    pub issues: Vec<Issue>,
    pub pulls: Vec<PullRequest>,
    pub file_contents: BTreeMap<String, String>,
}

impl ProjectSnapshot {
    pub fn issue(&self, number: u64) -> Option<&Issue> {
        self.issues.iter().find(|i| i.number == number)
    }

    pub fn open_issues(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.is_open())
    }
}

/// File extensions treated as source code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceWhitelist {
    extensions: Vec<String>,
}

impl Default for SourceWhitelist {
    fn default() -> Self {
        Self::new(["java", "cs", "cpp", "cc", "cxx", "h", "hpp"])
    }
}

impl SourceWhitelist {
    pub fn new<I>(extensions: I) -> Self
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        Self {
            extensions: extensions
                .into_iter()
                .map(|e| e.as_ref().trim_start_matches('.').to_ascii_lowercase())
                .collect(),
        }
    }

    pub fn matches(&self, path: &str) -> bool {
        let file = path.rsplit('/').next().unwrap_or(path);
        match file.rsplit_once('.') {
            Some((stem, ext)) if !stem.is_empty() => {
                let ext = ext.to_ascii_lowercase();
                self.extensions.contains(&ext)
            }
            _ => false,
        }
    }

    pub fn extensions(&self) -> &[String] {
        &self.extensions
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("snapshot is not valid JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Schema(#[from] SchemaViolation),
}

pub fn save_snapshot(snapshot: &ProjectSnapshot, path: &Path) -> Result<(), SnapshotError> {
    let text = serde_json::to_string_pretty(snapshot).expect("snapshot serializes");
    std::fs::write(path, text).map_err(|source| SnapshotError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_snapshot(path: &Path) -> Result<ProjectSnapshot, SnapshotError> {
    let text = std::fs::read_to_string(path).map_err(|source| SnapshotError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_snapshot(&text)
}

/// Validate and decode a snapshot document.
pub fn parse_snapshot(text: &str) -> Result<ProjectSnapshot, SnapshotError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| SnapshotError::Json(e.to_string()))?;
    schema::validate(&value)?;
    serde_json::from_value(value).map_err(|e| SnapshotError::Json(e.to_string()))
}
