use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gimli::api::{labels_for_dataset, ApiTaxonomy};
use gimli::dataset::Dataset;
use gimli::evaluation::{cross_validate, render_table, EvalConfig, Mode, SplitParams};
use gimli::forest::{ForestHyperparams, ForestModel};
use gimli::links::build_links;
use gimli::miner::{load_snapshot, save_snapshot, Auth, GithubClient, ProjectRef, TOKEN_ENV};
use gimli::service::{serve, AppState, ProjectModels, ServeConfig};
use gimli::synth::{generate, SynthConfig};
use gimli::text::{preprocess, CleaningConfig, TfidfModel};

#[derive(Parser)]
#[command(
    name = "gimli",
    version,
    about = "Recommend open issues by the API domains a contributor knows"
)]
struct Cli {
    /// Project snapshot (JSON) to read or write.
    #[arg(long, global = true)]
    snapshot: Option<PathBuf>,
    /// API taxonomy CSV (`prefix,label`); defaults to the bundled one.
    #[arg(long, global = true)]
    taxonomy: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download issues, pull requests and changed source files into a snapshot.
    Mine(MineArgs),
    /// Link issues to merged pull requests and label them with API domains.
    BuildDataset(BuildDatasetArgs),
    /// Fit TF-IDF and the per-label forests on a dataset.
    Train(TrainArgs),
    /// ShuffleSplit cross-validation of one or more datasets.
    Evaluate(EvaluateArgs),
    /// Run the HTTP API with periodic reclassification.
    Serve(ServeArgs),
    /// Classify the open issues of configured projects once.
    Classify(ClassifyArgs),
    /// Write a synthetic dataset with planted keywords.
    Synth(SynthArgs),
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    owner: String,
    #[arg(long)]
    name: String,
    /// Display label; defaults to the repository name.
    #[arg(long)]
    label: Option<String>,
    /// API token; falls back to the environment.
    #[arg(long, env = TOKEN_ENV, hide_env_values = true)]
    token: Option<String>,
    #[arg(long, default_value = "https://api.github.com")]
    api_url: String,
    #[arg(long, default_value_t = 100)]
    page_size: usize,
    /// Also download issue comments.
    #[arg(long)]
    comments: bool,
}

#[derive(Args)]
struct BuildDatasetArgs {
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Directory that receives tfidf.json and forest.json.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 2)]
    min_df: usize,
    /// File of issue-template lines to strip, one per line.
    #[arg(long)]
    template_lines: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    n_estimators: usize,
    #[arg(long, default_value_t = 50)]
    max_depth: usize,
    #[arg(long, default_value_t = 3)]
    min_samples_split: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// One dataset per project; with several, a combined run is added.
    #[arg(long = "dataset", required = true)]
    datasets: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    splits: usize,
    #[arg(long, default_value_t = 0.1)]
    test_fraction: f64,
    #[arg(long, default_value_t = 2)]
    min_df: usize,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = 50)]
    n_estimators: usize,
    /// Write the full reports as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// Service configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Reclassification interval, e.g. `24h`, `30m`.
    #[arg(long, default_value = "24h", value_parser = humantime::parse_duration)]
    interval: Duration,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Only this project (display label).
    #[arg(long)]
    project: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    issues: usize,
    #[arg(long, default_value_t = 5)]
    labels: usize,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Mine(a) => mine(&cli, a),
        Command::BuildDataset(a) => build_dataset(&cli, a),
        Command::Train(a) => train(&cli, a),
        Command::Evaluate(a) => evaluate(&cli, a),
        Command::Serve(a) => serve_cmd(a),
        Command::Classify(a) => classify(a),
        Command::Synth(a) => synth(&cli, a),
    }
}

fn require_snapshot(cli: &Cli) -> Result<&Path> {
    cli.snapshot
        .as_deref()
        .context("--snapshot is required for this command")
}

fn taxonomy(cli: &Cli) -> Result<ApiTaxonomy> {
    match &cli.taxonomy {
        Some(p) => ApiTaxonomy::load(p).with_context(|| format!("loading taxonomy {}", p.display())),
        None => Ok(ApiTaxonomy::reference()),
    }
}

fn mine(cli: &Cli, a: &MineArgs) -> Result<()> {
    let out = require_snapshot(cli)?;
    let auth = match a.token.as_deref().map(str::trim) {
        Some(t) if !t.is_empty() => Auth::Token(t.to_string()),
        _ => Auth::Anonymous,
    };
    let client = GithubClient::live(auth)?
        .with_base_url(&a.api_url)
        .with_page_size(a.page_size)
        .with_comments(a.comments);
    let project = ProjectRef::new(&a.owner, &a.name, a.label.as_deref().unwrap_or(&a.name));
    let snapshot = client.mine(&project)?;
    save_snapshot(&snapshot, out)?;
    println!(
        "{}: {} issues, {} pull requests, {} source files -> {}",
        project.slug(),
        snapshot.issues.len(),
        snapshot.pulls.len(),
        snapshot.file_contents.len(),
        out.display()
    );
    Ok(())
}

fn build_dataset(cli: &Cli, a: &BuildDatasetArgs) -> Result<()> {
    let snapshot = load_snapshot(require_snapshot(cli)?)?;
    let taxonomy = taxonomy(cli)?;
    let (linked, summary) = build_links(&snapshot);
    let (labeled, labeling) = labels_for_dataset(&linked, &snapshot, &taxonomy)?;
    let dataset = Dataset::from_labeled(snapshot.project.clone(), &labeled, &taxonomy);
    dataset.save(&a.out)?;
    println!(
        "merged PRs {}, links {}, dangling refs {}, docs-only PRs {}, open-issue refs {}, linked issues {}",
        summary.merged_prs,
        summary.admitted_links,
        summary.dangling_refs,
        summary.docs_only_exclusions,
        summary.open_issue_refs,
        summary.linked_issues
    );
    println!(
        "labeled {} issues ({} dropped without labels) over {} labels -> {}",
        labeling.labeled,
        labeling.dropped_unlabeled,
        dataset.label_universe.len(),
        a.out.display()
    );
    Ok(())
}

fn cleaning(template_lines: Option<&Path>) -> Result<CleaningConfig> {
    let cfg = CleaningConfig::default();
    Ok(match template_lines {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            cfg.with_template_lines(text.lines())
        }
        None => cfg,
    })
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let dataset = Dataset::load(&a.dataset)?;
    if dataset.len() < 2 {
        bail!("need at least 2 examples, the dataset has {}", dataset.len());
    }
    let config = cleaning(a.template_lines.as_deref())?;
    let tokens: Vec<Vec<String>> = dataset
        .examples
        .iter()
        .map(|e| preprocess(&e.title, &e.body, &config))
        .collect();
    let tfidf = TfidfModel::fit(&tokens, a.min_df, config)?;
    let x: Vec<_> = tokens.iter().map(|t| tfidf.transform(t)).collect();

    let counts = dataset.label_counts();
    let (labels, constant): (Vec<String>, Vec<String>) = dataset
        .label_universe
        .iter()
        .cloned()
        .partition(|l| (1..dataset.len()).contains(&counts[l]));
    if !constant.is_empty() {
        tracing::warn!(labels = ?constant, "skipping labels that are constant over the dataset");
    }
    if labels.is_empty() {
        bail!("no label has both positive and negative examples");
    }
    let y = dataset.label_matrix(&labels);
    let hp = ForestHyperparams {
        n_estimators: a.n_estimators,
        max_depth: a.max_depth,
        min_samples_split: a.min_samples_split,
        seed: cli.seed,
        ..Default::default()
    };
    let forest = ForestModel::train(&x, &y, &labels, &hp)?;
    let models = ProjectModels::new(tfidf, forest, 0.5)?;
    models.save(&a.out_dir)?;
    println!(
        "{} examples, {} terms, {} labels, {} nodes -> {} ({})",
        dataset.len(),
        models.tfidf.dim(),
        labels.len(),
        models.forest.node_count(),
        a.out_dir.display(),
        models.model_id()
    );
    Ok(())
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let datasets = a
        .datasets
        .iter()
        .map(|p| Dataset::load(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let config = EvalConfig {
        hyperparams: ForestHyperparams {
            n_estimators: a.n_estimators,
            seed: cli.seed,
            ..Default::default()
        },
        split: SplitParams {
            n_splits: a.splits,
            test_fraction: a.test_fraction,
            seed: cli.seed,
        },
        min_df: a.min_df,
        threshold: a.threshold,
        cleaning: CleaningConfig::default(),
    };
    let mut reports = Vec::new();
    for d in &datasets {
        reports.push(cross_validate(d, Mode::OneProject, &config)?);
    }
    if datasets.len() > 1 {
        reports.push(cross_validate(
            &Dataset::combine(&datasets),
            Mode::MultiProject,
            &config,
        )?);
    }
    print!("{}", render_table(&reports));
    for r in &reports {
        if !r.dropped_labels.is_empty() {
            let who = r.project.as_ref().map_or("combined", |p| p.display_label.as_str());
            println!(
                "{who}: dropped {} rare labels: {}",
                r.dropped_labels.len(),
                r.dropped_labels.join(", ")
            );
        }
    }
    if let Some(path) = &a.json {
        std::fs::write(path, serde_json::to_string_pretty(&reports)?)?;
    }
    Ok(())
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
}

fn serve_cmd(a: &ServeArgs) -> Result<()> {
    let (config, base) = ServeConfig::load(&a.config)?;
    let service = config.build(&base, &Auth::from_env())?;
    let scheduler = service.scheduler();
    let state = AppState::new(Arc::clone(&service), scheduler.clone());
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port)).await?;
        tracing::info!(addr = %listener.local_addr()?, interval = ?a.interval, "serving");
        let jobs = tokio::spawn({
            let scheduler = scheduler.clone();
            let interval = a.interval;
            async move { scheduler.run(interval, None, shutdown_signal()).await }
        });
        serve(listener, state, shutdown_signal()).await?;
        jobs.await?;
        Ok(())
    })
}

fn classify(a: &ClassifyArgs) -> Result<()> {
    let (config, base) = ServeConfig::load(&a.config)?;
    let service = config.build(&base, &Auth::from_env())?;
    let wanted: BTreeSet<String> = match &a.project {
        Some(p) => std::iter::once(p.clone()).collect(),
        None => service.project_labels().into_iter().collect(),
    };
    for label in wanted {
        let rows = service.classify_open_issues(&label)?;
        println!("{label}: {rows} open issues classified");
    }
    Ok(())
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let corpus = generate(&SynthConfig {
        n_issues: a.issues,
        n_labels: a.labels,
        seed: cli.seed,
        ..Default::default()
    });
    corpus.dataset.save(&a.out)?;
    println!(
        "{} synthetic issues over {} labels -> {}",
        corpus.dataset.len(),
        corpus.dataset.label_universe.len(),
        a.out.display()
    );
    Ok(())
}
