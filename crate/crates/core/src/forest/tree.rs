use serde::{Deserialize, Serialize};

use super::ForestHyperparams;
use crate::rng::SplitMix64;
use crate::text::FeatureVector;

/// Splits whose information gain does not exceed this are treated as no gain.
pub const GAIN_EPSILON: f64 = 1e-12;

/// Shannon entropy in bits of a two-class node with `pos` positives out of `n`.
pub fn binary_entropy(pos: u64, n: u64) -> f64 {
    if n == 0 || pos == 0 || pos == n {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    let q = (n - pos) as f64 / n as f64;
    -(p * p.log2() + q * q.log2())
}

/// Information gain of splitting a node of `n` samples (`pos` positive) into a
/// left child of `n_left` samples (`pos_left` positive) and the remainder.
pub fn information_gain(pos: u64, n: u64, pos_left: u64, n_left: u64) -> f64 {
    let n_right = n - n_left;
    let pos_right = pos - pos_left;
    let w_left = n_left as f64 / n as f64;
    let w_right = n_right as f64 / n as f64;
    binary_entropy(pos, n) - w_left * binary_entropy(pos_left, n_left) - w_right * binary_entropy(pos_right, n_right)
}

/// Threshold between two consecutive distinct sorted values; `x <= t` goes left.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t >= hi {
        lo
    } else {
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        positive_fraction: f64,
        samples: usize,
    },
}

/// Binary decision tree stored as a flat node array rooted at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    /// Fit a single tree. Bootstrap and feature sampling follow `hp`, drawing from
    /// a generator seeded with `seed`.
    pub fn fit(x: &[FeatureVector], y: &[bool], hp: &ForestHyperparams, seed: u64) -> Self {
        let columns = Columns::new(x);
        let mut rng = SplitMix64::new(seed);
        let samples = if hp.bootstrap {
            bootstrap(&mut rng, x.len())
        } else {
            (0..x.len()).collect()
        };
        grow(x, &columns, y, hp, rng, samples)
    }

    /// Positive fraction stored in the leaf that `x` reaches.
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { positive_fraction, .. } => return *positive_fraction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if x.get(*feature) <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Structural sanity check used when loading models.
    pub(crate) fn validate(&self, feature_dim: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let n = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if *feature >= feature_dim {
                        return Err(format!("node {i}: feature {feature} >= {feature_dim}"));
                    }
                    if !threshold.is_finite() {
                        return Err(format!("node {i}: non-finite threshold"));
                    }
                    if *left <= i || *right <= i || *left >= n || *right >= n {
                        return Err(format!("node {i}: child index out of order or range"));
                    }
                }
                Node::Leaf { positive_fraction, .. } => {
                    if !(0.0..=1.0).contains(positive_fraction) {
                        return Err(format!("node {i}: positive_fraction out of [0, 1]"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `n` row indices drawn uniformly with replacement.
pub(crate) fn bootstrap(rng: &mut SplitMix64, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.below(n)).collect()
}

/// Column-major copy of the non-zero entries, rows ascending within a column.
pub(crate) struct Columns {
    cols: Vec<Vec<(usize, f64)>>,
}

impl Columns {
    pub(crate) fn new(x: &[FeatureVector]) -> Self {
        let dim = x.iter().map(|v| v.dim).max().unwrap_or(0);
        let mut cols = vec![Vec::new(); dim];
        for (row, v) in x.iter().enumerate() {
            for &(f, w) in &v.entries {
                cols[f].push((row, w));
            }
        }
        Self { cols }
    }

    fn dim(&self) -> usize {
        self.cols.len()
    }
}

pub(crate) fn features_per_split(hp: &ForestHyperparams, dim: usize) -> usize {
    hp.max_features.resolve(dim)
}

struct Grower<'a> {
    x: &'a [FeatureVector],
    columns: &'a Columns,
    y: &'a [bool],
    hp: &'a ForestHyperparams,
    budget: usize,
    rng: SplitMix64,
    nodes: Vec<Node>,
    /// Multiplicity of each row in the node being split.
    mult: Vec<u32>,
    /// Stamp per feature to collect the node's candidate pool.
    seen: Vec<usize>,
    stamp: usize,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl BestSplit {
    fn beats(&self, other: &Option<BestSplit>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.gain > o.gain || (self.gain == o.gain && (self.feature, self.threshold) < (o.feature, o.threshold))
            }
        }
    }
}

/// Grow a tree depth-first (left subtree before right) from `samples`, which
/// may contain repeated rows.
pub(crate) fn grow(
    x: &[FeatureVector],
    columns: &Columns,
    y: &[bool],
    hp: &ForestHyperparams,
    rng: SplitMix64,
    samples: Vec<usize>,
) -> DecisionTree {
    let mut g = Grower {
        x,
        columns,
        y,
        hp,
        budget: features_per_split(hp, columns.dim()),
        rng,
        nodes: Vec::new(),
        mult: vec![0; x.len()],
        seen: vec![0; columns.dim()],
        stamp: 0,
    };
    g.build(samples, 0);
    DecisionTree { nodes: g.nodes }
}

impl Grower<'_> {
    fn build(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let n = samples.len() as u64;
        let pos = samples.iter().filter(|&&r| self.y[r]).count() as u64;
        let leaf = Node::Leaf {
            positive_fraction: if n == 0 { 0.0 } else { pos as f64 / n as f64 },
            samples: samples.len(),
        };
        self.nodes.push(leaf);

        if depth >= self.hp.max_depth || samples.len() < self.hp.min_samples_split || pos == 0 || pos == n {
            return id;
        }

        let Some(best) = self.best_split(&samples, pos) else {
            return id;
        };
        if best.gain <= GAIN_EPSILON {
            return id;
        }

        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&r| self.x[r].get(best.feature) <= best.threshold);
        let left_id = self.build(left, depth + 1);
        let right_id = self.build(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            gain: best.gain,
            left: left_id,
            right: right_id,
        };
        id
    }

    fn best_split(&mut self, samples: &[usize], pos: u64) -> Option<BestSplit> {
        // Candidate pool: features with a non-zero value in at least one node sample.
        self.stamp += 1;
        let mut pool = Vec::new();
        for &r in samples {
            self.mult[r] += 1;
            for &(f, _) in &self.x[r].entries {
                if self.seen[f] != self.stamp {
                    self.seen[f] = self.stamp;
                    pool.push(f);
                }
            }
        }
        pool.sort_unstable();

        let n = samples.len() as u64;
        let mut best: Option<BestSplit> = None;
        let mut visited = 0;
        let mut i = 0;
        while i < pool.len() && visited < self.budget {
            let j = i + self.rng.below(pool.len() - i);
            pool.swap(i, j);
            let feature = pool[i];
            i += 1;
            if let Some(candidate) = self.scan_feature(feature, n, pos) {
                visited += 1;
                if let Some(c) = candidate {
                    if c.beats(&best) {
                        best = Some(c);
                    }
                }
            }
        }

        for &r in samples {
            self.mult[r] = 0;
        }
        best
    }

    /// `None` if the feature is constant over the node; `Some(None)` if it varies
    /// but no threshold leaves both children with `min_samples_leaf` samples.
    fn scan_feature(&self, feature: usize, n: u64, pos: u64) -> Option<Option<BestSplit>> {
        // (value, count, positive count)
        let mut groups: Vec<(f64, u64, u64)> = Vec::new();
        let mut nz_n = 0u64;
        let mut nz_pos = 0u64;
        for &(r, v) in &self.columns.cols[feature] {
            let m = self.mult[r] as u64;
            if m == 0 {
                continue;
            }
            let p = if self.y[r] { m } else { 0 };
            nz_n += m;
            nz_pos += p;
            groups.push((v, m, p));
        }
        if nz_n < n {
            groups.push((0.0, n - nz_n, pos - nz_pos));
        }
        groups.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, u64, u64)> = Vec::with_capacity(groups.len());
        for g in groups {
            match merged.last_mut() {
                Some(last) if last.0 == g.0 => {
                    last.1 += g.1;
                    last.2 += g.2;
                }
                _ => merged.push(g),
            }
        }
        if merged.len() < 2 {
            return None;
        }

        let min_leaf = self.hp.min_samples_leaf as u64;
        let mut best: Option<BestSplit> = None;
        let mut n_left = 0u64;
        let mut pos_left = 0u64;
        for w in 0..merged.len() - 1 {
            n_left += merged[w].1;
            pos_left += merged[w].2;
            if n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let candidate = BestSplit {
                gain: information_gain(pos, n, pos_left, n_left),
                feature,
                threshold: midpoint(merged[w].0, merged[w + 1].0),
            };
            if candidate.beats(&best) {
                best = Some(candidate);
            }
        }
        Some(best)
    }
}
