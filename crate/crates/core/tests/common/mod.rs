//! Independent reference implementations used as test oracles. Nothing here
//! calls into the crate's algorithms; only plain data crosses the boundary.
#![allow(dead_code)]

pub mod world;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

pub fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(path)
}

/// SplitMix64, written out again from its published definition.
pub struct Sm64(pub u64);

impl Sm64 {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.next() as u128 * n as u128) >> 64) as usize
    }
}

pub fn finalize(z: u64) -> u64 {
    let mut z = z;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xCBF2_9CE4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01B3)
    })
}

pub fn ref_tree_seed(seed: u64, label: &str, tree: usize) -> u64 {
    seed ^ finalize(fnv1a(label.as_bytes()).wrapping_add(finalize(tree as u64)))
}

// ---------------------------------------------------------------- TF-IDF

pub struct TfidfOracle {
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
}

/// Dense evaluation of idf = ln((1 + N) / (1 + df)) + 1 over terms with df >= min_df.
pub fn tfidf_fit(docs: &[Vec<String>], min_df: usize) -> TfidfOracle {
    let all: BTreeSet<&String> = docs.iter().flatten().collect();
    let n = docs.len() as f64;
    let mut terms = Vec::new();
    let mut idf = Vec::new();
    for t in all {
        let df = docs.iter().filter(|d| d.contains(t)).count();
        if df >= min_df.max(1) {
            terms.push(t.clone());
            idf.push(((1.0 + n) / (1.0 + df as f64)).ln() + 1.0);
        }
    }
    TfidfOracle { terms, idf }
}

/// Raw counts times idf, divided by the Euclidean norm (zero vectors stay zero).
pub fn tfidf_transform(model: &TfidfOracle, doc: &[String]) -> Vec<f64> {
    let mut v: Vec<f64> = model
        .terms
        .iter()
        .zip(&model.idf)
        .map(|(t, idf)| doc.iter().filter(|d| *d == t).count() as f64 * idf)
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

// ---------------------------------------------------------------- metrics

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsOracle {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub hamming_loss: f64,
}

pub fn metrics_oracle(t: &[Vec<bool>], p: &[Vec<bool>]) -> MetricsOracle {
    let (mut tp, mut fp, mut fn_, mut cells, mut wrong) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for i in 0..t.len() {
        for j in 0..t[i].len() {
            cells += 1;
            if t[i][j] != p[i][j] {
                wrong += 1;
            }
            if t[i][j] && p[i][j] {
                tp += 1;
            }
            if !t[i][j] && p[i][j] {
                fp += 1;
            }
            if t[i][j] && !p[i][j] {
                fn_ += 1;
            }
        }
    }
    let precision = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        1.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f_measure = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    MetricsOracle {
        precision,
        recall,
        f_measure,
        hamming_loss: wrong as f64 / cells as f64,
    }
}

// ---------------------------------------------------------------- splits

pub fn entropy(pos: usize, n: usize) -> f64 {
    if n == 0 || pos == 0 || pos == n {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    let q = (n - pos) as f64 / n as f64;
    -(p * p.log2() + q * q.log2())
}

pub fn gain(pos: usize, n: usize, pos_l: usize, n_l: usize) -> f64 {
    entropy(pos, n)
        - (n_l as f64 / n as f64) * entropy(pos_l, n_l)
        - ((n - n_l) as f64 / n as f64) * entropy(pos - pos_l, n - n_l)
}

pub fn mid(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t >= hi {
        lo
    } else {
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Best split of `rows` over `features`, enumerating every midpoint and
/// counting children directly. Ties: lowest feature, then lowest threshold.
pub fn exhaustive_split(
    x: &[Vec<f64>],
    y: &[bool],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let n = rows.len();
    let pos = rows.iter().filter(|&&r| y[r]).count();
    let mut best: Option<Split> = None;
    for &f in features {
        let mut values: Vec<f64> = rows.iter().map(|&r| x[r][f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = mid(w[0], w[1]);
            let left: Vec<usize> = rows.iter().copied().filter(|&r| x[r][f] <= t).collect();
            if left.len() < min_leaf || n - left.len() < min_leaf {
                continue;
            }
            let pos_l = left.iter().filter(|&&r| y[r]).count();
            let g = gain(pos, n, pos_l, left.len());
            let better = match best {
                None => true,
                Some(b) => g > b.gain || (g == b.gain && (f, t) < (b.feature, b.threshold)),
            };
            if better {
                best = Some(Split {
                    feature: f,
                    threshold: t,
                    gain: g,
                });
            }
        }
    }
    best
}

// ---------------------------------------------------------------- forest

#[derive(Debug, Clone, PartialEq)]
pub enum RefNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<RefNode>,
        right: Box<RefNode>,
    },
}

impl RefNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            RefNode::Leaf(p) => *p,
            RefNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

pub struct RefParams {
    pub max_depth: usize,
    pub min_split: usize,
    pub min_leaf: usize,
    /// Features to scan per node (non-constant ones).
    pub budget: usize,
    pub bootstrap: bool,
}

/// Naive dense tree: bootstrap with `below(n)`, then depth-first growth where
/// each node partially shuffles the ascending list of features that are
/// non-zero somewhere in the node and scans them until `budget` non-constant
/// ones have been evaluated.
pub fn ref_tree(x: &[Vec<f64>], y: &[bool], p: &RefParams, seed: u64) -> RefNode {
    let mut rng = Sm64(seed);
    let n = x.len();
    let rows: Vec<usize> = if p.bootstrap {
        (0..n).map(|_| rng.below(n)).collect()
    } else {
        (0..n).collect()
    };
    ref_grow(x, y, p, &mut rng, rows, 0)
}

fn ref_grow(x: &[Vec<f64>], y: &[bool], p: &RefParams, rng: &mut Sm64, rows: Vec<usize>, depth: usize) -> RefNode {
    let n = rows.len();
    let pos = rows.iter().filter(|&&r| y[r]).count();
    let frac = if n == 0 { 0.0 } else { pos as f64 / n as f64 };
    if depth >= p.max_depth || n < p.min_split || pos == 0 || pos == n {
        return RefNode::Leaf(frac);
    }
    let dim = x[0].len();
    let mut pool: Vec<usize> = (0..dim).filter(|&f| rows.iter().any(|&r| x[r][f] != 0.0)).collect();
    let mut best: Option<Split> = None;
    let mut visited = 0;
    let mut i = 0;
    while i < pool.len() && visited < p.budget {
        let j = i + rng.below(pool.len() - i);
        pool.swap(i, j);
        let f = pool[i];
        i += 1;
        let first = x[rows[0]][f];
        if rows.iter().all(|&r| x[r][f] == first) {
            continue;
        }
        visited += 1;
        if let Some(s) = exhaustive_split(x, y, &rows, &[f], p.min_leaf) {
            let better = match best {
                None => true,
                Some(b) => s.gain > b.gain || (s.gain == b.gain && (s.feature, s.threshold) < (b.feature, b.threshold)),
            };
            if better {
                best = Some(s);
            }
        }
    }
    match best {
        Some(s) if s.gain > 1e-12 => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&r| x[r][s.feature] <= s.threshold);
            let left = ref_grow(x, y, p, rng, l, depth + 1);
            let right = ref_grow(x, y, p, rng, r, depth + 1);
            RefNode::Split {
                feature: s.feature,
                threshold: s.threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
        _ => RefNode::Leaf(frac),
    }
}

pub fn ceil_sqrt(d: usize) -> usize {
    (1..=d.max(1)).find(|k| k * k >= d).unwrap_or(1)
}

/// Per-label forests of reference trees; returns vote fractions per label.
pub fn ref_forest_scores(
    x: &[Vec<f64>],
    y: &[Vec<bool>],
    labels: &[String],
    n_trees: usize,
    seed: u64,
    queries: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let p = RefParams {
        max_depth: 50,
        min_split: 3,
        min_leaf: 1,
        budget: ceil_sqrt(x[0].len()),
        bootstrap: true,
    };
    let forests: Vec<Vec<RefNode>> = labels
        .iter()
        .enumerate()
        .map(|(l, name)| {
            let col: Vec<bool> = y.iter().map(|r| r[l]).collect();
            (0..n_trees)
                .map(|t| ref_tree(x, &col, &p, ref_tree_seed(seed, name, t)))
                .collect()
        })
        .collect();
    queries
        .iter()
        .map(|q| {
            forests
                .iter()
                .map(|trees| trees.iter().map(|t| t.predict(q)).sum::<f64>() / trees.len() as f64)
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------- folds

/// ShuffleSplit folds from the documented stream: one generator, and per fold
/// a Fisher-Yates pass over 0..n from the last index down.
pub fn ref_folds(n: usize, n_splits: usize, test: usize, seed: u64) -> Vec<(BTreeSet<usize>, BTreeSet<usize>)> {
    let mut rng = Sm64(seed);
    (0..n_splits)
        .map(|_| {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.below(i + 1);
                perm.swap(i, j);
            }
            (
                perm[test..].iter().copied().collect(),
                perm[..test].iter().copied().collect(),
            )
        })
        .collect()
}

/// Count of each value, for comparing multisets.
pub fn histogram(v: &[usize]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for &x in v {
        *h.entry(x).or_insert(0) += 1;
    }
    h
}
