//! Synthetic labeled issues with planted per-label keywords.
//!
//! Each label owns a disjoint vocabulary of made-up words. An issue picks one
//! to three labels, draws one to three keywords from each, and mixes them with
//! filler words, so its labels are exactly the labels whose keywords occur in
//! its text. Every word is its own Porter stem and no word is a stopword.

use std::collections::BTreeSet;

use crate::dataset::{Dataset, Example};
use crate::miner::ProjectRef;
use crate::rng::SplitMix64;
use crate::text::{default_stopwords, porter::stem, preprocess, CleaningConfig};

const LABELS: [&str; 8] = [
    "Databases",
    "User Interface",
    "Network",
    "Security",
    "Logging",
    "Parser",
    "Multi-Thread",
    "Test",
];
const CONSONANTS: &[u8] = b"bdfgklmnprtvz";
const VOWELS: &[u8] = b"aiou";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub n_issues: usize,
    /// At most 8.
    pub n_labels: usize,
    pub words_per_label: usize,
    pub filler_words: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_issues: 500,
            n_labels: 5,
            words_per_label: 10,
            filler_words: 40,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticCorpus {
    pub dataset: Dataset,
    /// (label, keywords) in label-universe order.
    pub vocabularies: Vec<(String, Vec<String>)>,
    pub filler: Vec<String>,
}

impl SyntheticCorpus {
    /// The keyword-lookup oracle: labels whose keywords survive preprocessing of the text.
    pub fn keyword_labels(&self, title: &str, body: &str) -> BTreeSet<String> {
        let tokens: BTreeSet<String> = preprocess(title, body, &CleaningConfig::default())
            .into_iter()
            .collect();
        self.vocabularies
            .iter()
            .filter(|(_, words)| words.iter().any(|w| tokens.contains(w)))
            .map(|(l, _)| l.clone())
            .collect()
    }
}

fn word(rng: &mut SplitMix64) -> String {
    let syllables = 2 + rng.below(2);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(CONSONANTS[rng.below(CONSONANTS.len())] as char);
        w.push(VOWELS[rng.below(VOWELS.len())] as char);
    }
    w.push(CONSONANTS[rng.below(CONSONANTS.len())] as char);
    w
}

/// `count` distinct words that are stable under stemming and unseen in `taken`.
fn fresh_words(rng: &mut SplitMix64, count: usize, taken: &mut BTreeSet<String>) -> Vec<String> {
    let stop = default_stopwords();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let w = word(rng);
        if stem(&w) != w || stop.contains(&w) || taken.contains(&w) {
            continue;
        }
        taken.insert(w.clone());
        out.push(w);
    }
    out
}

pub fn generate(config: &SynthConfig) -> SyntheticCorpus {
    let n_labels = config.n_labels.clamp(1, LABELS.len());
    let mut rng = SplitMix64::new(config.seed);
    let mut taken = BTreeSet::new();
    let vocabularies: Vec<(String, Vec<String>)> = LABELS[..n_labels]
        .iter()
        .map(|l| {
            (
                l.to_string(),
                fresh_words(&mut rng, config.words_per_label.max(1), &mut taken),
            )
        })
        .collect();
    let filler = fresh_words(&mut rng, config.filler_words.max(1), &mut taken);

    let mut examples = Vec::with_capacity(config.n_issues);
    for i in 0..config.n_issues {
        let k = match rng.below(10) {
            0..=5 => 1,
            6..=8 => 2,
            _ => 3,
        }
        .min(n_labels);
        let mut order: Vec<usize> = (0..n_labels).collect();
        rng.shuffle(&mut order);
        let chosen = &order[..k];

        let mut words = Vec::new();
        for &l in chosen {
            let vocab = &vocabularies[l].1;
            for _ in 0..1 + rng.below(3) {
                words.push(vocab[rng.below(vocab.len())].clone());
            }
        }
        for _ in 0..3 + rng.below(6) {
            words.push(filler[rng.below(filler.len())].clone());
        }
        rng.shuffle(&mut words);
        let split = 4.min(words.len());
        let number = i as u64 + 1;
        examples.push(Example {
            number,
            title: words[..split].join(" "),
            body: words[split..].join(" "),
            url: format!("https://github.com/synthetic/issues/issues/{number}"),
            labels: chosen.iter().map(|&l| vocabularies[l].0.clone()).collect(),
        });
    }
    SyntheticCorpus {
        dataset: Dataset {
            project: Some(ProjectRef::new("synthetic", "issues", "Synthetic")),
            label_universe: vocabularies.iter().map(|(l, _)| l.clone()).collect(),
            examples,
        },
        vocabularies,
        filler,
    }
}
