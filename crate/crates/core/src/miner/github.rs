use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::Value;

use super::{Issue, IssueState, ProjectRef, ProjectSnapshot, PullRequest, SourceWhitelist, Timestamp};

const PATH_SEGMENT: &percent_encoding::AsciiSet = &percent_encoding::NON_ALPHANUMERIC
    .remove(b'.')
    .remove(b'-')
    .remove(b'_')
    .remove(b'~');

/// Environment variable holding the API token.
pub const TOKEN_ENV: &str = "GIMLI_TOKEN";

#[derive(Debug, thiserror::Error)]
pub enum MinerError {
    #[error("rate limited at {url} after {retries} retries")]
    RateLimited { url: String, retries: u32 },
    #[error("authentication failed at {url} (status {status})")]
    AuthFailed { url: String, status: u16 },
    #[error("network error at {url}: {message}")]
    Network { url: String, message: String },
    #[error("unexpected status {status} at {url}")]
    Http { url: String, status: u16 },
    #[error("malformed response from {url}: {message}")]
    Decode { url: String, message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Auth {
    #[default]
    Anonymous,
    Token(String),
}

impl Auth {
    /// Token from [`TOKEN_ENV`] when set and non-empty.
    pub fn from_env() -> Self {
        match std::env::var(TOKEN_ENV) {
            Ok(t) if !t.trim().is_empty() => Auth::Token(t.trim().to_string()),
            _ => Auth::Anonymous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    #[serde(default)]
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl HttpResponse {
    pub fn json(status: u16, body: &Value) -> Self {
        Self {
            status,
            headers: Vec::new(),
            body: body.to_string(),
        }
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// A blocking GET. Errors are transport-level failures (no response at all).
pub trait Transport: Send + Sync {
    fn get(&self, url: &str, headers: &[(String, String)]) -> Result<HttpResponse, String>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(concat!("gimli/", env!("CARGO_PKG_VERSION")))
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str, headers: &[(String, String)]) -> Result<HttpResponse, String> {
        let mut req = self.client.get(url);
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .filter_map(|(k, v)| v.to_str().ok().map(|v| (k.as_str().to_string(), v.to_string())))
            .collect();
        let body = resp.text().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, headers, body })
    }
}

/// Recorded responses keyed by URL. A URL with several queued responses serves
/// them in order and then keeps repeating the last one.
#[derive(Default)]
pub struct FixtureTransport {
    responses: Mutex<HashMap<String, VecDeque<HttpResponse>>>,
    requests: Mutex<Vec<String>>,
}

#[derive(Deserialize)]
struct FixtureFile {
    url: String,
    #[serde(default = "ok_status")]
    status: u16,
    #[serde(default)]
    headers: BTreeMap<String, String>,
    body: Value,
}

fn ok_status() -> u16 {
    200
}

impl FixtureTransport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Load every `*.json` file in `dir`; each holds `{url, status?, headers?, body}`.
    /// A string `body` is served verbatim, anything else as JSON.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let t = Self::new();
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        for p in paths {
            let text = std::fs::read_to_string(&p)?;
            let f: FixtureFile = serde_json::from_str(&text)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", p.display())))?;
            let body = match f.body {
                Value::String(s) => s,
                other => other.to_string(),
            };
            t.push(
                &f.url,
                HttpResponse {
                    status: f.status,
                    headers: f.headers.into_iter().collect(),
                    body,
                },
            );
        }
        Ok(t)
    }

    pub fn push(&self, url: &str, response: HttpResponse) {
        self.responses
            .lock()
            .unwrap()
            .entry(url.to_string())
            .or_default()
            .push_back(response);
    }

    pub fn requests(&self) -> Vec<String> {
        self.requests.lock().unwrap().clone()
    }
}

impl Transport for FixtureTransport {
    fn get(&self, url: &str, _headers: &[(String, String)]) -> Result<HttpResponse, String> {
        self.requests.lock().unwrap().push(url.to_string());
        let mut map = self.responses.lock().unwrap();
        let queue = map
            .get_mut(url)
            .ok_or_else(|| format!("no recorded response for {url}"))?;
        if queue.len() > 1 {
            Ok(queue.pop_front().unwrap())
        } else {
            Ok(queue.front().cloned().unwrap())
        }
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, duration: Duration);
}

struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 5,
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(15 * 60),
        }
    }
}

/// REST v3 client. Clones share one transport and one rate-limit gate, so
/// concurrent fetches for different projects back off together.
#[derive(Clone)]
pub struct GithubClient {
    base_url: String,
    auth: Auth,
    transport: Arc<dyn Transport>,
    sleeper: Arc<dyn Sleeper>,
    retry: RetryPolicy,
    blocked_until: Arc<Mutex<Option<Instant>>>,
    page_size: usize,
    fetch_comments: bool,
    whitelist: SourceWhitelist,
}

impl GithubClient {
    pub fn new(transport: Arc<dyn Transport>, auth: Auth) -> Self {
        Self {
            base_url: "https://api.github.com".to_string(),
            auth,
            transport,
            sleeper: Arc::new(ThreadSleeper),
            retry: RetryPolicy::default(),
            blocked_until: Arc::new(Mutex::new(None)),
            page_size: 100,
            fetch_comments: true,
            whitelist: SourceWhitelist::default(),
        }
    }

    /// Client over real HTTP.
    pub fn live(auth: Auth) -> Result<Self, MinerError> {
        let t = HttpTransport::new().map_err(|message| MinerError::Network {
            url: "https://api.github.com".into(),
            message,
        })?;
        Ok(Self::new(Arc::new(t), auth))
    }

    pub fn with_base_url(mut self, base: &str) -> Self {
        self.base_url = base.trim_end_matches('/').to_string();
        self
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_page_size(mut self, page_size: usize) -> Self {
        self.page_size = page_size.clamp(1, 100);
        self
    }

    pub fn with_comments(mut self, fetch: bool) -> Self {
        self.fetch_comments = fetch;
        self
    }

    pub fn with_whitelist(mut self, whitelist: SourceWhitelist) -> Self {
        self.whitelist = whitelist;
        self
    }

    fn repo_url(&self, project: &ProjectRef) -> String {
        format!("{}/repos/{}/{}", self.base_url, project.owner, project.name)
    }

    fn headers(&self, accept: &str) -> Vec<(String, String)> {
        let mut h = vec![("Accept".to_string(), accept.to_string())];
        if let Auth::Token(t) = &self.auth {
            h.push(("Authorization".to_string(), format!("token {t}")));
        }
        h
    }

    fn wait_for_gate(&self) {
        let until = *self.blocked_until.lock().unwrap();
        if let Some(until) = until {
            let now = Instant::now();
            if until > now {
                self.sleeper.sleep(until - now);
            }
        }
    }

    /// GET with retry on rate limiting. Returns the final response (2xx or 404).
    fn request(&self, url: &str, accept: &str) -> Result<HttpResponse, MinerError> {
        let headers = self.headers(accept);
        let mut attempt = 0u32;
        loop {
            self.wait_for_gate();
            let resp = self
                .transport
                .get(url, &headers)
                .map_err(|message| MinerError::Network {
                    url: url.to_string(),
                    message,
                })?;
            if let Some(hint) = rate_limit_hint(&resp) {
                if attempt >= self.retry.max_retries {
                    return Err(MinerError::RateLimited {
                        url: url.to_string(),
                        retries: attempt,
                    });
                }
                let backoff = self.retry.base_delay * 2u32.saturating_pow(attempt);
                let delay = hint.max(backoff).min(self.retry.max_delay);
                *self.blocked_until.lock().unwrap() = Some(Instant::now() + delay);
                tracing::warn!(url, ?delay, attempt, "rate limited, backing off");
                attempt += 1;
                continue;
            }
            return match resp.status {
                200..=299 | 404 => Ok(resp),
                401 | 403 => Err(MinerError::AuthFailed {
                    url: url.to_string(),
                    status: resp.status,
                }),
                status => Err(MinerError::Http {
                    url: url.to_string(),
                    status,
                }),
            };
        }
    }

    /// Follow `rel="next"` links, concatenating the JSON array pages.
    fn paginate(&self, first: String) -> Result<Vec<Value>, MinerError> {
        let mut items = Vec::new();
        let mut next = Some(first);
        while let Some(url) = next {
            let resp = self.request(&url, "application/vnd.github+json")?;
            if resp.status == 404 {
                return Err(MinerError::Http { url, status: 404 });
            }
            let page: Value = serde_json::from_str(&resp.body).map_err(|e| MinerError::Decode {
                url: url.clone(),
                message: e.to_string(),
            })?;
            match page {
                Value::Array(v) => items.extend(v),
                _ => {
                    return Err(MinerError::Decode {
                        url,
                        message: "expected a JSON array page".into(),
                    })
                }
            }
            next = resp.header("link").and_then(next_link);
        }
        Ok(items)
    }

    /// All issues (open and closed), excluding pull requests, ascending by number.
    pub fn fetch_issues(&self, project: &ProjectRef) -> Result<Vec<Issue>, MinerError> {
        let url = format!(
            "{}/issues?state=all&per_page={}&sort=created&direction=asc",
            self.repo_url(project),
            self.page_size
        );
        let mut issues = Vec::new();
        for item in self.paginate(url.clone())? {
            if item.get("pull_request").is_some() {
                continue;
            }
            let raw: RawIssue = decode(&url, item)?;
            let comments = if self.fetch_comments && raw.comments > 0 {
                let curl = format!(
                    "{}/issues/{}/comments?per_page={}",
                    self.repo_url(project),
                    raw.number,
                    self.page_size
                );
                self.paginate(curl.clone())?
                    .into_iter()
                    .map(|c| decode::<RawComment>(&curl, c).map(|c| c.body.unwrap_or_default()))
                    .collect::<Result<_, _>>()?
            } else {
                Vec::new()
            };
            issues.push(raw.into_issue(comments));
        }
        issues.sort_by_key(|i| i.number);
        issues.dedup_by_key(|i| i.number);
        Ok(issues)
    }

    /// All pull requests with changed file names and commit messages, ascending by number.
    pub fn fetch_pulls(&self, project: &ProjectRef) -> Result<Vec<PullRequest>, MinerError> {
        let url = format!(
            "{}/pulls?state=all&per_page={}&sort=created&direction=asc",
            self.repo_url(project),
            self.page_size
        );
        let mut pulls = Vec::new();
        for item in self.paginate(url.clone())? {
            let raw: RawPull = decode(&url, item)?;
            let files_url = format!(
                "{}/pulls/{}/files?per_page={}",
                self.repo_url(project),
                raw.number,
                self.page_size
            );
            let changed_files = self
                .paginate(files_url.clone())?
                .into_iter()
                .map(|f| decode::<RawFile>(&files_url, f).map(|f| f.filename))
                .collect::<Result<_, _>>()?;
            let commits_url = format!(
                "{}/pulls/{}/commits?per_page={}",
                self.repo_url(project),
                raw.number,
                self.page_size
            );
            let commit_messages = self
                .paginate(commits_url.clone())?
                .into_iter()
                .map(|c| decode::<RawCommit>(&commits_url, c).map(|c| c.commit.message))
                .collect::<Result<_, _>>()?;
            pulls.push(PullRequest {
                number: raw.number,
                title: raw.title.unwrap_or_default(),
                body: raw.body.unwrap_or_default(),
                merged: raw.merged_at.is_some(),
                changed_files,
                commit_messages,
            });
        }
        pulls.sort_by_key(|p| p.number);
        pulls.dedup_by_key(|p| p.number);
        Ok(pulls)
    }

    /// Raw file text at the default branch; empty when the file no longer exists.
    pub fn fetch_file(&self, project: &ProjectRef, path: &str) -> Result<String, MinerError> {
        let encoded: String = path
            .split('/')
            .map(|seg| percent_encoding::utf8_percent_encode(seg, PATH_SEGMENT).to_string())
            .collect::<Vec<_>>()
            .join("/");
        let url = format!("{}/contents/{}", self.repo_url(project), encoded);
        let resp = self.request(&url, "application/vnd.github.raw")?;
        if resp.status == 404 {
            return Ok(String::new());
        }
        Ok(resp.body)
    }

    /// Mine issues, pulls and the contents of every whitelisted changed file.
    pub fn mine(&self, project: &ProjectRef) -> Result<ProjectSnapshot, MinerError> {
        let issues = self.fetch_issues(project)?;
        let pulls = self.fetch_pulls(project)?;
        let mut file_contents = BTreeMap::new();
        for path in pulls.iter().flat_map(|p| &p.changed_files) {
            if self.whitelist.matches(path) && !file_contents.contains_key(path) {
                let text = self.fetch_file(project, path)?;
                file_contents.insert(path.clone(), text);
            }
        }
        Ok(ProjectSnapshot {
            project: project.clone(),
            fetched_at: Timestamp::now(),
            issues,
            pulls,
            file_contents,
        })
    }
}

fn decode<T: serde::de::DeserializeOwned>(url: &str, v: Value) -> Result<T, MinerError> {
    serde_json::from_value(v).map_err(|e| MinerError::Decode {
        url: url.to_string(),
        message: e.to_string(),
    })
}

/// Wait requested by a rate-limit response, or `None` if it is not one.
fn rate_limit_hint(resp: &HttpResponse) -> Option<Duration> {
    let retry_after = resp
        .header("retry-after")
        .and_then(|v| v.trim().parse::<u64>().ok())
        .map(Duration::from_secs);
    let exhausted = resp.header("x-ratelimit-remaining").map(str::trim) == Some("0");
    match resp.status {
        429 => Some(retry_after.unwrap_or_default()),
        403 if exhausted || retry_after.is_some() => {
            let until_reset = resp
                .header("x-ratelimit-reset")
                .and_then(|v| v.trim().parse::<i64>().ok())
                .map(|reset| (reset - chrono::Utc::now().timestamp()).max(0) as u64)
                .map(Duration::from_secs);
            Some(retry_after.or(until_reset).unwrap_or_default())
        }
        _ => None,
    }
}

/// Extract the `rel="next"` target from a `Link` header.
fn next_link(header: &str) -> Option<String> {
    header.split(',').find_map(|part| {
        let mut pieces = part.split(';');
        let target = pieces.next()?.trim();
        let is_next = pieces.any(|p| {
            let p = p.trim();
            p == "rel=\"next\"" || p == "rel=next"
        });
        if is_next && target.starts_with('<') && target.ends_with('>') {
            Some(target[1..target.len() - 1].to_string())
        } else {
            None
        }
    })
}

#[derive(Deserialize)]
struct RawIssue {
    number: u64,
    title: Option<String>,
    body: Option<String>,
    state: String,
    closed_at: Option<String>,
    updated_at: Option<String>,
    html_url: Option<String>,
    #[serde(default)]
    comments: u64,
}

impl RawIssue {
    fn into_issue(self, comments: Vec<String>) -> Issue {
        let state = if self.state == "closed" {
            IssueState::Closed
        } else {
            IssueState::Open
        };
        let closed_at = match state {
            IssueState::Open => None,
            IssueState::Closed => self
                .closed_at
                .as_deref()
                .or(self.updated_at.as_deref())
                .and_then(Timestamp::parse)
                .or_else(|| Some(Timestamp::now())),
        };
        Issue {
            number: self.number,
            title: self.title.unwrap_or_default(),
            body: self.body.unwrap_or_default(),
            state,
            closed_at,
            url: self.html_url.unwrap_or_default(),
            comments,
        }
    }
}

#[derive(Deserialize)]
struct RawComment {
    body: Option<String>,
}

#[derive(Deserialize)]
struct RawPull {
    number: u64,
    title: Option<String>,
    body: Option<String>,
    merged_at: Option<String>,
}

#[derive(Deserialize)]
struct RawFile {
    filename: String,
}

#[derive(Deserialize)]
struct RawCommit {
    commit: RawCommitInner,
}

#[derive(Deserialize)]
struct RawCommitInner {
    message: String,
}
