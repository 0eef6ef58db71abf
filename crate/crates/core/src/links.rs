//! Joins merged pull requests to the closed issues they reference.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::miner::{Issue, ProjectRef, ProjectSnapshot, SourceWhitelist};

/// Where a reference was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    HashRefTitle,
    HashRefBody,
    UrlRefTitle,
    UrlRefBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuePrLink {
    pub issue_number: u64,
    pub pr_number: u64,
    pub evidence: Vec<Evidence>,
    /// Changed files of the PR that pass the source whitelist.
    pub source_files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkedExample {
    pub issue: Issue,
    pub links: Vec<IssuePrLink>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkedDataset {
    pub project: ProjectRef,
    pub examples: Vec<LinkedExample>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub merged_prs: usize,
    pub admitted_links: usize,
    /// References to issue numbers absent from the snapshot.
    pub dangling_refs: usize,
    /// References from merged PRs that changed no source file.
    pub docs_only_exclusions: usize,
    /// References to issues that are still open.
    pub open_issue_refs: usize,
    pub linked_issues: usize,
}

const MAX_DIGITS: usize = 9;

fn admits_preceding(c: Option<char>) -> bool {
    match c {
        None => true,
        Some(c) => c.is_whitespace() || "([{:,;.!?-".contains(c),
    }
}

/// `#N` references: `#` then 1 to 9 digits, preceded by start of text,
/// whitespace or one of `([{:,;.!?-`, and not followed by a word character.
fn hash_refs(text: &str, out: &mut BTreeSet<u64>) {
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if c != '#' || !admits_preceding(i.checked_sub(1).map(|p| chars[p])) {
            continue;
        }
        let digits: String = chars[i + 1..].iter().take_while(|c| c.is_ascii_digit()).collect();
        if digits.is_empty() || digits.len() > MAX_DIGITS {
            continue;
        }
        let after = chars.get(i + 1 + digits.len());
        if after.is_some_and(|c| c.is_alphanumeric() || *c == '_') {
            continue;
        }
        if let Ok(n) = digits.parse::<u64>() {
            if n > 0 {
                out.insert(n);
            }
        }
    }
}

/// Issue numbers from `http(s)://github.com/{owner}/{name}/issues/{n}` URLs of this project.
fn url_refs(text: &str, project: &ProjectRef, out: &mut BTreeSet<u64>) {
    let lower = text.to_lowercase();
    let needle_tail = format!(
        "github.com/{}/{}/issues/",
        project.owner.to_lowercase(),
        project.name.to_lowercase()
    );
    for scheme in ["https://", "http://"] {
        for prefix in [format!("{scheme}{needle_tail}"), format!("{scheme}www.{needle_tail}")] {
            let mut from = 0;
            while let Some(pos) = lower[from..].find(&prefix) {
                let start = from + pos + prefix.len();
                let digits: String = lower[start..].chars().take_while(|c| c.is_ascii_digit()).collect();
                let after = lower[start + digits.len()..].chars().next();
                let clean_end = after.is_none_or(|c| !(c.is_alphanumeric() || c == '_'));
                if !digits.is_empty() && digits.len() <= MAX_DIGITS && clean_end {
                    if let Ok(n) = digits.parse::<u64>() {
                        if n > 0 {
                            out.insert(n);
                        }
                    }
                }
                from = start;
            }
        }
    }
}

/// All issue numbers referenced in `text` by `#N` or by issue URL of `project`.
pub fn extract_issue_refs(text: &str, project: &ProjectRef) -> BTreeSet<u64> {
    let mut out = BTreeSet::new();
    hash_refs(text, &mut out);
    url_refs(text, project, &mut out);
    out
}

fn refs_with_evidence(title: &str, body: &str, project: &ProjectRef) -> BTreeMap<u64, BTreeSet<Evidence>> {
    let mut found: BTreeMap<u64, BTreeSet<Evidence>> = BTreeMap::new();
    let sources = [
        (title, Evidence::HashRefTitle, Evidence::UrlRefTitle),
        (body, Evidence::HashRefBody, Evidence::UrlRefBody),
    ];
    for (text, hash_kind, url_kind) in sources {
        let mut set = BTreeSet::new();
        hash_refs(text, &mut set);
        for n in set {
            found.entry(n).or_default().insert(hash_kind);
        }
        let mut set = BTreeSet::new();
        url_refs(text, project, &mut set);
        for n in set {
            found.entry(n).or_default().insert(url_kind);
        }
    }
    found
}

/// Build the linked dataset with the default source whitelist.
pub fn build_links(snapshot: &ProjectSnapshot) -> (LinkedDataset, BuildSummary) {
    build_links_with(snapshot, &SourceWhitelist::default())
}

pub fn build_links_with(snapshot: &ProjectSnapshot, whitelist: &SourceWhitelist) -> (LinkedDataset, BuildSummary) {
    let issues: BTreeMap<u64, &Issue> = snapshot.issues.iter().map(|i| (i.number, i)).collect();
    let mut summary = BuildSummary::default();
    let mut by_issue: BTreeMap<u64, Vec<IssuePrLink>> = BTreeMap::new();

    for pr in snapshot.pulls.iter().filter(|p| p.merged) {
        summary.merged_prs += 1;
        let source_files: Vec<String> = pr
            .changed_files
            .iter()
            .filter(|f| whitelist.matches(f))
            .cloned()
            .collect();
        for (number, evidence) in refs_with_evidence(&pr.title, &pr.body, &snapshot.project) {
            if number == pr.number {
                continue;
            }
            let Some(issue) = issues.get(&number) else {
                summary.dangling_refs += 1;
                continue;
            };
            if issue.is_open() {
                summary.open_issue_refs += 1;
                continue;
            }
            if source_files.is_empty() {
                summary.docs_only_exclusions += 1;
                continue;
            }
            summary.admitted_links += 1;
            by_issue.entry(number).or_default().push(IssuePrLink {
                issue_number: number,
                pr_number: pr.number,
                evidence: evidence.into_iter().collect(),
                source_files: source_files.clone(),
            });
        }
    }

    let examples: Vec<LinkedExample> = by_issue
        .into_iter()
        .map(|(number, links)| LinkedExample {
            issue: (*issues[&number]).clone(),
            links,
        })
        .collect();
    summary.linked_issues = examples.len();
    (
        LinkedDataset {
            project: snapshot.project.clone(),
            examples,
        },
        summary,
    )
}
