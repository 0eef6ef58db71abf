use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::porter;

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// Settings for turning issue text into tokens.
///
/// URL and code patterns are fixed; only the stopword list and the per-project
/// template lines vary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningConfig {
    pub stopwords: BTreeSet<String>,
    /// Lines removed verbatim (compared after trimming whitespace).
    pub template_lines: BTreeSet<String>,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            stopwords: default_stopwords(),
            template_lines: BTreeSet::new(),
        }
    }
}

impl CleaningConfig {
    pub fn new<S, T>(stopwords: S, template_lines: T) -> Self
    where
        S: IntoIterator,
        S::Item: AsRef<str>,
        T: IntoIterator,
        T::Item: AsRef<str>,
    {
        Self {
            stopwords: stopwords
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
            template_lines: template_lines
                .into_iter()
                .map(|l| l.as_ref().trim().to_string())
                .filter(|l| !l.is_empty())
                .collect(),
        }
    }

    pub fn with_template_lines<T>(mut self, lines: T) -> Self
    where
        T: IntoIterator,
        T::Item: AsRef<str>,
    {
        self.template_lines.extend(
            lines
                .into_iter()
                .map(|l| l.as_ref().trim().to_string())
                .filter(|l| !l.is_empty()),
        );
        self
    }

    /// Hex SHA-256 over the sorted stopwords and template lines.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.stopwords {
            h.update(b"s:");
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        for l in &self.template_lines {
            h.update(b"t:");
            h.update(l.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// The shipped English stopword list.
pub fn default_stopwords() -> BTreeSet<String> {
    DEFAULT_STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn code_fence() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```.*?```").unwrap())
}

fn inline_code() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"`[^`]*`").unwrap())
}

fn url() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[A-Za-z][A-Za-z0-9+.\-]*://\S+").unwrap())
}

/// Token stream plus the number of template lines that were removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preprocessed {
    pub tokens: Vec<String>,
    pub template_matches: usize,
}

/// Clean, tokenize and stem an issue's title and body.
pub fn preprocess(title: &str, body: &str, config: &CleaningConfig) -> Vec<String> {
    preprocess_with_stats(title, body, config).tokens
}

/// Same as [`preprocess`], also reporting how many template lines matched.
pub fn preprocess_with_stats(title: &str, body: &str, config: &CleaningConfig) -> Preprocessed {
    let text = format!("{title}\n{body}");
    let text = code_fence().replace_all(&text, " ");
    let text = inline_code().replace_all(&text, " ");
    let text = url().replace_all(&text, " ");

    let mut template_matches = 0;
    let mut kept = String::with_capacity(text.len());
    for line in text.lines() {
        if !config.template_lines.is_empty() && config.template_lines.contains(line.trim()) {
            template_matches += 1;
            continue;
        }
        kept.push_str(line);
        kept.push('\n');
    }

    let letters: String = kept
        .to_lowercase()
        .chars()
        .map(|c| {
            if c.is_ascii_lowercase() || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect();

    let tokens = letters
        .split_whitespace()
        .filter(|w| !config.stopwords.contains(*w))
        .map(porter::stem)
        .filter(|t| t.len() >= 2)
        .collect();

    Preprocessed {
        tokens,
        template_matches,
    }
}
