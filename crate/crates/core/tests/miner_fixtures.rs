mod common;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use gimli::links::build_links;
use gimli::miner::{
    load_snapshot, parse_snapshot, save_snapshot, Auth, FixtureTransport, GithubClient, HttpResponse, HttpTransport,
    IssueState, MinerError, ProjectRef, ProjectSnapshot, RetryPolicy, Sleeper, Timestamp,
};
use serde_json::json;

fn widgets() -> ProjectRef {
    ProjectRef::new("acme", "widgets", "Widgets")
}

#[derive(Default)]
struct RecordingSleeper(Mutex<Vec<Duration>>);

impl Sleeper for RecordingSleeper {
    fn sleep(&self, d: Duration) {
        self.0.lock().unwrap().push(d);
    }
}

#[test]
fn paginates_237_issues() {
    let t = Arc::new(FixtureTransport::from_dir(&common::fixture("github/issues_237")).unwrap());
    let client = GithubClient::new(t.clone(), Auth::Anonymous);
    let issues = client.fetch_issues(&widgets()).unwrap();
    assert_eq!(issues.len(), 237);
    for (i, issue) in issues.iter().enumerate() {
        let n = i as u64 + 1;
        assert_eq!(issue.number, n);
        assert_eq!(issue.state == IssueState::Closed, !n.is_multiple_of(3), "issue {n}");
        assert_eq!(issue.closed_at.is_some(), !n.is_multiple_of(3));
    }
    let reqs = t.requests();
    assert_eq!(reqs.len(), 3);
    assert!(reqs[1].ends_with("&page=2") && reqs[2].ends_with("&page=3"));
}

#[test]
fn snapshot_round_trip_of_237_issues() {
    let t = Arc::new(FixtureTransport::from_dir(&common::fixture("github/issues_237")).unwrap());
    let client = GithubClient::new(t, Auth::Anonymous);
    let snap = ProjectSnapshot {
        project: widgets(),
        fetched_at: Timestamp::parse("2021-07-01T00:00:00Z").unwrap(),
        issues: client.fetch_issues(&widgets()).unwrap(),
        pulls: Vec::new(),
        file_contents: Default::default(),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snap.json");
    save_snapshot(&snap, &path).unwrap();
    let back = load_snapshot(&path).unwrap();
    assert_eq!(back, snap);
    assert_eq!(back.issues.len(), 237);
}

#[test]
fn mines_small_project() {
    let t = Arc::new(FixtureTransport::from_dir(&common::fixture("github/project_small")).unwrap());
    let secret = "ghp_fixture_secret_value";
    let client = GithubClient::new(t, Auth::Token(secret.into()));
    let snap = client.mine(&widgets()).unwrap();
    assert_eq!(snap.issues.len(), 5);
    assert!(
        snap.issues.iter().all(|i| i.number != 5),
        "pull request item leaked into issues"
    );
    assert_eq!(snap.pulls.len(), 12);
    let merged: Vec<u64> = snap.pulls.iter().filter(|p| p.merged).map(|p| p.number).collect();
    assert_eq!(merged, vec![7, 9, 12]);
    let pr7 = snap.pulls.iter().find(|p| p.number == 7).unwrap();
    assert_eq!(pr7.changed_files.len(), 2);
    assert_eq!(snap.file_contents.len(), 7);
    assert!(!snap.file_contents.keys().any(|k| k.ends_with(".md")));

    let text = serde_json::to_string(&snap).unwrap();
    assert!(!text.contains(secret), "credential persisted in snapshot");
    assert_eq!(parse_snapshot(&text).unwrap(), snap);

    let (linked, summary) = build_links(&snap);
    let numbers: Vec<u64> = linked.examples.iter().map(|e| e.issue.number).collect();
    assert_eq!(numbers, vec![1, 3]);
    assert_eq!(summary.merged_prs, 3);
    assert_eq!(summary.docs_only_exclusions, 1);
}

#[test]
fn retries_after_rate_limit() {
    let t = Arc::new(FixtureTransport::new());
    let url = "https://api.github.com/repos/acme/widgets/issues?state=all&per_page=100&sort=created&direction=asc";
    t.push(
        url,
        HttpResponse::json(429, &json!({"message": "slow down"})).with_header("Retry-After", "2"),
    );
    t.push(
        url,
        HttpResponse::json(403, &json!({"message": "rate limit"}))
            .with_header("X-RateLimit-Remaining", "0")
            .with_header("X-RateLimit-Reset", "0"),
    );
    t.push(
        url,
        HttpResponse::json(
            200,
            &json!([{"number": 1, "title": "t", "body": null, "state": "open", "html_url": "u"}]),
        ),
    );
    let sleeper = Arc::new(RecordingSleeper::default());
    let client = GithubClient::new(t.clone(), Auth::Anonymous)
        .with_sleeper(sleeper.clone())
        .with_retry(RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_secs(5),
        });
    let issues = client.fetch_issues(&widgets()).unwrap();
    assert_eq!(issues.len(), 1);
    assert_eq!(t.requests().len(), 3);
    let sleeps = sleeper.0.lock().unwrap().clone();
    assert!(!sleeps.is_empty());
    assert!(
        sleeps[0] > Duration::from_millis(1500),
        "Retry-After not honoured: {sleeps:?}"
    );
}

#[test]
fn gives_up_after_max_retries() {
    let t = Arc::new(FixtureTransport::new());
    let url = "https://api.github.com/repos/acme/widgets/pulls?state=all&per_page=100&sort=created&direction=asc";
    t.push(url, HttpResponse::json(429, &json!({})));
    let client = GithubClient::new(t, Auth::Anonymous)
        .with_sleeper(Arc::new(RecordingSleeper::default()))
        .with_retry(RetryPolicy {
            max_retries: 2,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(10),
        });
    assert!(matches!(
        client.fetch_pulls(&widgets()),
        Err(MinerError::RateLimited { retries: 2, .. })
    ));
}

#[test]
fn bad_credentials_fail_fast() {
    let t = Arc::new(FixtureTransport::new());
    let url = "https://api.github.com/repos/acme/widgets/issues?state=all&per_page=100&sort=created&direction=asc";
    t.push(url, HttpResponse::json(401, &json!({"message": "Bad credentials"})));
    let client = GithubClient::new(t.clone(), Auth::Token("nope".into()));
    assert!(matches!(
        client.fetch_issues(&widgets()),
        Err(MinerError::AuthFailed { status: 401, .. })
    ));
    assert_eq!(t.requests().len(), 1);
}

mod live_transport {
    use super::*;
    use axum::extract::{Query, State};
    use axum::http::{HeaderMap, StatusCode};
    use axum::response::IntoResponse;
    use axum::routing::get;
    use axum::Router;
    use std::collections::HashMap;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[derive(Clone, Default)]
    struct Hits {
        count: Arc<AtomicUsize>,
        auth: Arc<Mutex<Vec<String>>>,
        base: Arc<Mutex<String>>,
    }

    async fn issues(
        State(h): State<Hits>,
        Query(q): Query<HashMap<String, String>>,
        headers: HeaderMap,
    ) -> impl IntoResponse {
        let hit = h.count.fetch_add(1, Ordering::SeqCst);
        if let Some(a) = headers.get("authorization") {
            h.auth.lock().unwrap().push(a.to_str().unwrap().to_string());
        }
        if hit == 0 {
            return (
                StatusCode::TOO_MANY_REQUESTS,
                [("retry-after", "0".to_string())],
                "{}".to_string(),
            )
                .into_response();
        }
        let base = h.base.lock().unwrap().clone();
        let page: u64 = q.get("page").and_then(|p| p.parse().ok()).unwrap_or(1);
        let body = json!([{"number": page, "title": format!("Issue {page}"), "state": "closed",
                           "closed_at": "2021-01-01T00:00:00Z", "html_url": format!("https://example/{page}")}]);
        if page == 1 {
            let next = format!(
                "<{base}/repos/acme/widgets/issues?state=all&per_page=100&sort=created&direction=asc&page=2>; rel=\"next\""
            );
            (StatusCode::OK, [("link", next)], body.to_string()).into_response()
        } else {
            (StatusCode::OK, body.to_string()).into_response()
        }
    }

    #[test]
    fn http_transport_against_local_server() {
        let hits = Hits::default();
        let (tx, rx) = std::sync::mpsc::channel();
        let state = hits.clone();
        std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                tx.send(listener.local_addr().unwrap()).unwrap();
                let app = Router::new()
                    .route("/repos/acme/widgets/issues", get(issues))
                    .with_state(state);
                axum::serve(listener, app).await.unwrap();
            });
        });
        let addr = rx.recv().unwrap();
        let base = format!("http://{addr}");
        *hits.base.lock().unwrap() = base.clone();

        let client = GithubClient::new(Arc::new(HttpTransport::new().unwrap()), Auth::Token("s3cret".into()))
            .with_base_url(&base)
            .with_sleeper(Arc::new(RecordingSleeper::default()))
            .with_retry(RetryPolicy {
                max_retries: 2,
                base_delay: Duration::from_millis(1),
                max_delay: Duration::from_millis(5),
            });
        let issues = client.fetch_issues(&widgets()).unwrap();
        assert_eq!(issues.iter().map(|i| i.number).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(hits.count.load(Ordering::SeqCst), 3);
        assert!(hits.auth.lock().unwrap().iter().all(|a| a == "token s3cret"));
    }
}
