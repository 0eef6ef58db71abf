use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Mutex;

use rusqlite::{params, Connection, OptionalExtension};

use super::{ClassifiedIssue, ServiceError};
use crate::miner::{ProjectRef, Timestamp};

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS projects (
    display_label  TEXT PRIMARY KEY,
    owner          TEXT NOT NULL,
    name           TEXT NOT NULL,
    label_universe TEXT NOT NULL,
    model_id       TEXT NOT NULL,
    registered_at  TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS classified_issues (
    project       TEXT NOT NULL REFERENCES projects(display_label) ON DELETE CASCADE,
    number        INTEGER NOT NULL,
    title         TEXT NOT NULL,
    body          TEXT NOT NULL,
    url           TEXT NOT NULL,
    labels        TEXT NOT NULL,
    model_id      TEXT NOT NULL,
    classified_at TEXT NOT NULL,
    PRIMARY KEY (project, number, model_id)
);
CREATE INDEX IF NOT EXISTS classified_issues_by_project ON classified_issues (project, model_id);
";

/// Catalog row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectRow {
    pub project: ProjectRef,
    pub label_universe: Vec<String>,
    pub model_id: String,
}

/// Single-file SQLite store. One connection behind a mutex: a classification
/// batch is one transaction, so readers see either all of it or none.
pub struct Store {
    conn: Mutex<Connection>,
}

fn unavailable(e: rusqlite::Error) -> ServiceError {
    ServiceError::StoreUnavailable(e.to_string())
}

fn decode_labels<T: FromIterator<String>>(text: &str) -> rusqlite::Result<T> {
    let v: Vec<String> = serde_json::from_str(text)
        .map_err(|e| rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e)))?;
    Ok(v.into_iter().collect())
}

impl Store {
    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        Self::init(Connection::open(path).map_err(unavailable)?)
    }

    pub fn open_in_memory() -> Result<Self, ServiceError> {
        Self::init(Connection::open_in_memory().map_err(unavailable)?)
    }

    fn init(conn: Connection) -> Result<Self, ServiceError> {
        conn.execute_batch("PRAGMA foreign_keys = ON;").map_err(unavailable)?;
        conn.execute_batch(SCHEMA).map_err(unavailable)?;
        Ok(Self { conn: Mutex::new(conn) })
    }

    fn lock(&self) -> Result<std::sync::MutexGuard<'_, Connection>, ServiceError> {
        self.conn
            .lock()
            .map_err(|_| ServiceError::StoreUnavailable("store lock poisoned".into()))
    }

    /// Insert or refresh a catalog row. Stored issues classified by a different
    /// model are removed.
    pub fn upsert_project(&self, row: &ProjectRow) -> Result<(), ServiceError> {
        let mut conn = self.lock()?;
        let tx = conn.transaction().map_err(unavailable)?;
        tx.execute(
            "INSERT INTO projects (display_label, owner, name, label_universe, model_id, registered_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6)
             ON CONFLICT(display_label) DO UPDATE SET
                owner = excluded.owner, name = excluded.name,
                label_universe = excluded.label_universe, model_id = excluded.model_id",
            params![
                row.project.display_label,
                row.project.owner,
                row.project.name,
                serde_json::to_string(&row.label_universe).expect("labels serialize"),
                row.model_id,
                Timestamp::now().to_string(),
            ],
        )
        .map_err(unavailable)?;
        tx.execute(
            "DELETE FROM classified_issues WHERE project = ?1 AND model_id <> ?2",
            params![row.project.display_label, row.model_id],
        )
        .map_err(unavailable)?;
        tx.commit().map_err(unavailable)
    }

    pub fn projects(&self) -> Result<Vec<ProjectRow>, ServiceError> {
        let conn = self.lock()?;
        let mut stmt = conn
            .prepare("SELECT display_label, owner, name, label_universe, model_id FROM projects ORDER BY display_label")
            .map_err(unavailable)?;
        let rows = stmt
            .query_map([], |r| {
                Ok(ProjectRow {
                    project: ProjectRef::new(r.get::<_, String>(1)?, r.get::<_, String>(2)?, r.get::<_, String>(0)?),
                    label_universe: decode_labels(&r.get::<_, String>(3)?)?,
                    model_id: r.get(4)?,
                })
            })
            .map_err(unavailable)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(unavailable)?;
        Ok(rows)
    }

    /// Make the stored rows for `project` exactly `rows`: upsert each one and
    /// delete every other row of the project, all in one transaction.
    pub fn replace_issues(&self, project: &str, rows: &[ClassifiedIssue]) -> Result<usize, ServiceError> {
        let mut conn = self.lock()?;
        let tx = conn.transaction().map_err(unavailable)?;
        tx.execute(
            "CREATE TEMP TABLE IF NOT EXISTS keep (number INTEGER NOT NULL, model_id TEXT NOT NULL)",
            [],
        )
        .map_err(unavailable)?;
        tx.execute("DELETE FROM keep", []).map_err(unavailable)?;
        {
            let mut upsert = tx
                .prepare(
                    "INSERT INTO classified_issues (project, number, title, body, url, labels, model_id, classified_at)
                     VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)
                     ON CONFLICT(project, number, model_id) DO UPDATE SET
                        title = excluded.title, body = excluded.body, url = excluded.url,
                        labels = excluded.labels, classified_at = excluded.classified_at",
                )
                .map_err(unavailable)?;
            let mut keep = tx
                .prepare("INSERT INTO keep (number, model_id) VALUES (?1, ?2)")
                .map_err(unavailable)?;
            for row in rows {
                if row.project != project {
                    return Err(ServiceError::StoreUnavailable(format!(
                        "row for project {:?} in a batch for {project:?}",
                        row.project
                    )));
                }
                let labels: Vec<&String> = row.labels.iter().collect();
                upsert
                    .execute(params![
                        project,
                        row.number as i64,
                        row.title,
                        row.body,
                        row.url,
                        serde_json::to_string(&labels).expect("labels serialize"),
                        row.model_id,
                        row.classified_at.to_string(),
                    ])
                    .map_err(unavailable)?;
                keep.execute(params![row.number as i64, row.model_id])
                    .map_err(unavailable)?;
            }
        }
        tx.execute(
            "DELETE FROM classified_issues WHERE project = ?1
               AND NOT EXISTS (SELECT 1 FROM keep k
                               WHERE k.number = classified_issues.number
                                 AND k.model_id = classified_issues.model_id)",
            params![project],
        )
        .map_err(unavailable)?;
        tx.execute("DELETE FROM keep", []).map_err(unavailable)?;
        tx.commit().map_err(unavailable)?;
        Ok(rows.len())
    }

    /// Stored rows for `project` and `model_id`, by issue number.
    pub fn issues(&self, project: &str, model_id: &str) -> Result<Vec<ClassifiedIssue>, ServiceError> {
        let conn = self.lock()?;
        let mut stmt = conn
            .prepare_cached(
                "SELECT number, title, body, url, labels, classified_at FROM classified_issues
                 WHERE project = ?1 AND model_id = ?2 ORDER BY number",
            )
            .map_err(unavailable)?;
        let rows = stmt
            .query_map(params![project, model_id], |r| {
                let ts: String = r.get(5)?;
                Ok(ClassifiedIssue {
                    project: project.to_string(),
                    number: r.get::<_, i64>(0)? as u64,
                    title: r.get(1)?,
                    body: r.get(2)?,
                    url: r.get(3)?,
                    labels: decode_labels::<BTreeSet<String>>(&r.get::<_, String>(4)?)?,
                    model_id: model_id.to_string(),
                    classified_at: Timestamp::parse(&ts).unwrap_or_else(Timestamp::now),
                })
            })
            .map_err(unavailable)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(unavailable)?;
        Ok(rows)
    }

    pub fn count(&self, project: &str) -> Result<usize, ServiceError> {
        let conn = self.lock()?;
        let n: i64 = conn
            .query_row(
                "SELECT COUNT(*) FROM classified_issues WHERE project = ?1",
                params![project],
                |r| r.get(0),
            )
            .map_err(unavailable)?;
        Ok(n as usize)
    }

    pub fn model_id(&self, project: &str) -> Result<Option<String>, ServiceError> {
        let conn = self.lock()?;
        conn.query_row(
            "SELECT model_id FROM projects WHERE display_label = ?1",
            params![project],
            |r| r.get(0),
        )
        .optional()
        .map_err(unavailable)
    }
}
