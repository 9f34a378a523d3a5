//! Random forest classifier: bagged Gini decision trees with per-node
//! feature subsampling.

use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: u32,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, label: u32) -> Self {
        Self { features, label }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or no split exists.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per node; `None` tries all of them.
    pub feature_subsample: Option<usize>,
    /// Resample the training set with replacement for each tree.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 25,
            max_depth: None,
            min_leaf: 1,
            feature_subsample: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForestError {
    #[error("training data needs at least two samples")]
    EmptyDataset,
    #[error("training data has only one class")]
    SingleClass,
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sample {0} has a non-finite feature")]
    NonFiniteFeature(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf_for(&self, x: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Longest root-to-leaf path, counted in splits.
    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(self, 0)
    }

    pub fn predict(&self, x: &[f64]) -> u32 {
        argmax(self.leaf_for(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: ForestParams,
    pub seed: u64,
    pub n_features: usize,
    pub n_classes: usize,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub label: u32,
    /// Tree votes indexed by class id.
    pub votes: Vec<u32>,
}

/// Lowest index among the maxima.
fn argmax(counts: &[u32]) -> u32 {
    let mut best = 0;
    for (i, c) in counts.iter().enumerate() {
        if *c > counts[best] {
            best = i;
        }
    }
    best as u32
}

pub fn train_forest(
    data: &[LabeledSample],
    params: &ForestParams,
    seed: u64,
) -> Result<RandomForest, ForestError> {
    if data.len() < 2 {
        return Err(ForestError::EmptyDataset);
    }
    if params.n_trees == 0 {
        return Err(ForestError::InvalidParams("n_trees must be positive"));
    }
    if params.min_leaf == 0 {
        return Err(ForestError::InvalidParams("min_leaf must be positive"));
    }
    if params.feature_subsample == Some(0) {
        return Err(ForestError::InvalidParams(
            "feature_subsample must be positive",
        ));
    }
    let n_features = data[0].features.len();
    for (i, s) in data.iter().enumerate() {
        if s.features.len() != n_features {
            return Err(ForestError::DimensionMismatch {
                expected: n_features,
                found: s.features.len(),
            });
        }
        if s.features.iter().any(|f| !f.is_finite()) {
            return Err(ForestError::NonFiniteFeature(i));
        }
    }
    let n_classes = data.iter().map(|s| s.label).max().expect("non-empty") as usize + 1;
    if data.iter().all(|s| s.label == data[0].label) {
        return Err(ForestError::SingleClass);
    }

    let trees = (0..params.n_trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..data.len())
                    .map(|_| rng.random_range(0..data.len()))
                    .collect()
            } else {
                (0..data.len()).collect()
            };
            TreeBuilder {
                data,
                params,
                n_features,
                n_classes,
                rng,
                nodes: Vec::new(),
            }
            .build(rows)
        })
        .collect();

    Ok(RandomForest {
        params: params.clone(),
        seed,
        n_features,
        n_classes,
        trees,
    })
}

impl RandomForest {
    pub fn classify(&self, x: &[f64]) -> Result<Classification, ForestError> {
        if x.len() != self.n_features {
            return Err(ForestError::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let mut votes = alloc::vec![0u32; self.n_classes];
        for t in &self.trees {
            votes[t.predict(x) as usize] += 1;
        }
        Ok(Classification {
            label: argmax(&votes),
            votes,
        })
    }

    pub fn accuracy(&self, data: &[LabeledSample]) -> Result<f64, ForestError> {
        let mut hits = 0usize;
        for s in data {
            if self.classify(&s.features)?.label == s.label {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len().max(1) as f64)
    }
}

pub fn classify(f: &RandomForest, x: &[f64]) -> Result<Classification, ForestError> {
    f.classify(x)
}

struct TreeBuilder<'a> {
    data: &'a [LabeledSample],
    params: &'a ForestParams,
    n_features: usize,
    n_classes: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl TreeBuilder<'_> {
    fn build(mut self, rows: Vec<usize>) -> Tree {
        self.nodes.push(Node::Leaf { counts: Vec::new() });
        let mut stack = alloc::vec![(0usize, rows, 0usize)];
        while let Some((slot, rows, depth)) = stack.pop() {
            let counts = self.counts(&rows);
            let pure = counts.iter().filter(|c| **c > 0).count() <= 1;
            let depth_left = self.params.max_depth.is_none_or(|d| depth < d);
            let split = if !pure && depth_left && rows.len() >= 2 * self.params.min_leaf {
                self.best_split(&rows)
            } else {
                None
            };
            match split {
                Some(s) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = rows
                        .into_iter()
                        .partition(|&i| self.data[i].features[s.feature] <= s.threshold);
                    let left = self.nodes.len();
                    self.nodes.push(Node::Leaf { counts: Vec::new() });
                    self.nodes.push(Node::Leaf { counts: Vec::new() });
                    self.nodes[slot] = Node::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left,
                        right: left + 1,
                    };
                    stack.push((left + 1, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
                None => self.nodes[slot] = Node::Leaf { counts },
            }
        }
        Tree { nodes: self.nodes }
    }

    fn counts(&self, rows: &[usize]) -> Vec<u32> {
        let mut c = alloc::vec![0u32; self.n_classes];
        for &i in rows {
            c[self.data[i].label as usize] += 1;
        }
        c
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Split> {
        let k = self
            .params
            .feature_subsample
            .unwrap_or(self.n_features)
            .min(self.n_features);
        let mut chosen: Vec<usize> = index::sample(&mut self.rng, self.n_features, k).into_vec();
        chosen.sort_unstable();
        if let Some(s) = self.search(rows, &chosen) {
            return Some(s);
        }
        if k < self.n_features {
            let all: Vec<usize> = (0..self.n_features).collect();
            return self.search(rows, &all);
        }
        None
    }

    fn search(&self, rows: &[usize], features: &[usize]) -> Option<Split> {
        let n = rows.len();
        let total = self.counts(rows);
        let mut best: Option<Split> = None;
        let mut sorted = rows.to_vec();
        for &f in features {
            sorted.sort_by(|&a, &b| {
                self.data[a].features[f]
                    .total_cmp(&self.data[b].features[f])
                    .then(a.cmp(&b))
            });
            let mut left = alloc::vec![0u32; self.n_classes];
            for i in 0..n - 1 {
                left[self.data[sorted[i]].label as usize] += 1;
                let (x, y) = (
                    self.data[sorted[i]].features[f],
                    self.data[sorted[i + 1]].features[f],
                );
                if x == y {
                    continue;
                }
                let nl = i + 1;
                let nr = n - nl;
                if nl < self.params.min_leaf || nr < self.params.min_leaf {
                    continue;
                }
                let right: Vec<u32> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let impurity =
                    (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                let mut threshold = x + (y - x) / 2.0;
                if threshold >= y {
                    threshold = x;
                }
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    best = Some(Split {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }
}

fn gini(counts: &[u32], n: usize) -> f64 {
    let n = n as f64;
    1.0 - counts
        .iter()
        .map(|&c| (c as f64 / n) * (c as f64 / n))
        .sum::<f64>()
}
