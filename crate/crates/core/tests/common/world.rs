//! A small end-to-end service setup: a model trained on a synthetic corpus and
//! a snapshot of open issues with planted keywords, so the expected labels of
//! every open issue are known in advance.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gimli::forest::{ForestHyperparams, ForestModel};
use gimli::miner::{save_snapshot, Issue, IssueState, ProjectRef, ProjectSnapshot, Timestamp};
use gimli::service::{AppState, IssueSource, ProjectModels, Service, Store};
use gimli::synth::{generate, SynthConfig, SyntheticCorpus};
use gimli::text::{preprocess, CleaningConfig, TfidfModel};

pub const PROJECT: &str = "Widgets";

pub struct World {
    pub dir: tempfile::TempDir,
    pub corpus: SyntheticCorpus,
    pub models: ProjectModels,
    pub snapshot: PathBuf,
    pub issues: Vec<Issue>,
    /// Labels each open issue was built to carry.
    pub planted: BTreeMap<u64, BTreeSet<String>>,
}

pub fn project() -> ProjectRef {
    ProjectRef::new("acme", "widgets", PROJECT)
}

pub fn train(corpus: &SyntheticCorpus, seed: u64) -> ProjectModels {
    let cfg = CleaningConfig::default();
    let tokens: Vec<Vec<String>> = corpus
        .dataset
        .examples
        .iter()
        .map(|e| preprocess(&e.title, &e.body, &cfg))
        .collect();
    let tfidf = TfidfModel::fit(&tokens, 2, cfg).unwrap();
    let x: Vec<_> = tokens.iter().map(|t| tfidf.transform(t)).collect();
    let labels = corpus.dataset.label_universe.clone();
    let y = corpus.dataset.label_matrix(&labels);
    let hp = ForestHyperparams {
        seed,
        ..ForestHyperparams::default()
    };
    let forest = ForestModel::train(&x, &y, &labels, &hp).unwrap();
    ProjectModels::new(tfidf, forest, 0.5).unwrap()
}

fn issue(number: u64, state: IssueState, words: &[&str]) -> Issue {
    let split = words.len().min(3);
    Issue {
        number,
        title: words[..split].join(" "),
        body: words[split..].join(" "),
        state,
        closed_at: match state {
            IssueState::Open => None,
            IssueState::Closed => Timestamp::parse("2022-03-01T00:00:00Z"),
        },
        url: format!("https://github.com/acme/widgets/issues/{number}"),
        comments: Vec::new(),
    }
}

pub fn write_snapshot(path: &Path, issues: &[Issue]) {
    let snap = ProjectSnapshot {
        project: project(),
        fetched_at: Timestamp::parse("2022-03-02T00:00:00Z").unwrap(),
        issues: issues.to_vec(),
        pulls: Vec::new(),
        file_contents: Default::default(),
    };
    save_snapshot(&snap, path).unwrap();
}

pub fn world() -> World {
    let corpus = generate(&SynthConfig {
        n_issues: 300,
        seed: 7,
        ..SynthConfig::default()
    });
    let models = train(&corpus, 7);
    let vocab: BTreeMap<&str, &Vec<String>> = corpus.vocabularies.iter().map(|(l, w)| (l.as_str(), w)).collect();
    let kw = |label: &str, i: usize| vocab[label][i].as_str();
    let f = |i: usize| corpus.filler[i].as_str();

    let plan: Vec<(u64, IssueState, Vec<&str>)> = vec![
        (1001, IssueState::Open, vec!["Databases", "User Interface"]),
        (1002, IssueState::Open, vec!["Databases"]),
        (1003, IssueState::Open, vec!["Network"]),
        (1004, IssueState::Open, vec!["User Interface", "Network"]),
        (1005, IssueState::Open, vec![]),
        (1006, IssueState::Open, vec!["Databases", "Network"]),
        (1007, IssueState::Open, vec!["Security"]),
        (1008, IssueState::Closed, vec!["Databases"]),
    ];
    let mut issues = Vec::new();
    let mut planted = BTreeMap::new();
    for (k, (number, state, labels)) in plan.into_iter().enumerate() {
        let mut words = vec![f(k), f(k + 10)];
        for (j, l) in labels.iter().enumerate() {
            words.insert(j, kw(l, k % 10));
            words.push(kw(l, (k + 3) % 10));
        }
        issues.push(issue(number, state, &words));
        if state == IssueState::Open {
            planted.insert(number, labels.iter().map(|s| s.to_string()).collect());
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let snapshot = dir.path().join("snapshot.json");
    write_snapshot(&snapshot, &issues);
    World {
        dir,
        corpus,
        models,
        snapshot,
        issues,
        planted,
    }
}

impl World {
    pub fn service(&self) -> Arc<Service> {
        let store = Arc::new(Store::open(&self.dir.path().join("issues.db")).unwrap());
        let service = Service::new(store);
        service
            .register_project(
                project(),
                self.models.clone(),
                IssueSource::Snapshot(self.snapshot.clone()),
            )
            .unwrap();
        Arc::new(service)
    }

    /// Rewrite the snapshot with `number` closed.
    pub fn close(&mut self, number: u64) {
        for i in &mut self.issues {
            if i.number == number {
                i.state = IssueState::Closed;
                i.closed_at = Timestamp::parse("2022-03-05T00:00:00Z");
            }
        }
        write_snapshot(&self.snapshot, &self.issues);
    }
}

pub struct Server {
    pub addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Server {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn spawn(state: AppState) -> Server {
    let (addr_tx, addr_rx) = std::sync::mpsc::channel();
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            addr_tx.send(listener.local_addr().unwrap()).unwrap();
            gimli::service::serve(listener, state, async {
                let _ = stop_rx.await;
            })
            .await
            .unwrap();
        });
    });
    Server {
        addr: addr_rx.recv().unwrap(),
        stop: Some(stop_tx),
        thread: Some(thread),
    }
}
