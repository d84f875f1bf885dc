//! Logistic regression, CART decision trees (Gini) and random forests.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("gini impurity of an empty node")]
    EmptyNode,
    #[error("no features selected")]
    EmptyMask,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("no training rows")]
    NoRows,
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("model expects feature {index} but input has {available} columns")]
    MissingFeature { index: usize, available: usize },
    #[error("model was trained on {expected} features, input has {found}")]
    FeatureCount { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed serialized tree: {0}")]
    MalformedTree(String),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// `1 − Σ pᵢ²` for a binary node with the given class counts.
pub fn gini_impurity(negatives: usize, positives: usize) -> Result<f64> {
    let n = negatives + positives;
    if n == 0 {
        return Err(ModelError::EmptyNode);
    }
    Ok(gini(negatives as f64, positives as f64))
}

fn gini(neg: f64, pos: f64) -> f64 {
    let n = neg + pos;
    let (p0, p1) = (neg / n, pos / n);
    1.0 - (p0 * p0 + p1 * p1)
}

fn check_xy(x: &Array2<f64>, y: &[u8]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(ModelError::LengthMismatch {
            rows: x.nrows(),
            labels: y.len(),
        });
    }
    if y.is_empty() {
        return Err(ModelError::NoRows);
    }
    Ok(())
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogRegConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 300,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub trained_feature_indices: Vec<usize>,
}

/// Dot product with four independent accumulators so the loop vectorizes
/// while staying deterministic.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Full-batch gradient descent on the L2-regularized mean cross-entropy,
/// starting from zero weights, using only the columns in `features`.
pub fn logreg_fit(x: &Array2<f64>, y: &[u8], features: &[usize], config: &LogRegConfig) -> Result<LogRegModel> {
    check_xy(x, y)?;
    if features.is_empty() {
        return Err(ModelError::EmptyMask);
    }
    if let Some(&j) = features.iter().find(|&&j| j >= x.ncols()) {
        return Err(ModelError::MissingFeature {
            index: j,
            available: x.ncols(),
        });
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(ModelError::SingleClass);
    }
    let n = y.len();
    let p = features.len();
    // Row-major copy of the selected columns so each epoch is one fused pass.
    let mut rows = Vec::with_capacity(n * p);
    for row in x.rows() {
        rows.extend(features.iter().map(|&j| row[j]));
    }
    let mut weights = vec![0.0; p];
    let mut bias = 0.0;
    let mut grad = vec![0.0; p];
    let inv_n = 1.0 / n as f64;
    for _ in 0..config.epochs {
        grad.fill(0.0);
        let mut bias_grad = 0.0;
        for (r, &t) in rows.chunks_exact(p).zip(y) {
            let residual = sigmoid(bias + dot(r, &weights)) - f64::from(t);
            bias_grad += residual;
            for (g, v) in grad.iter_mut().zip(r) {
                *g += residual * v;
            }
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= config.learning_rate * (g * inv_n + 2.0 * config.l2 * *w);
        }
        bias -= config.learning_rate * bias_grad * inv_n;
    }
    Ok(LogRegModel {
        weights,
        bias,
        trained_feature_indices: features.to_vec(),
    })
}

/// `sigmoid(x · w + b)` per row, reading the model's trained columns of `x`.
pub fn logreg_predict_proba(model: &LogRegModel, x: &Array2<f64>) -> Result<Vec<f64>> {
    if let Some(&j) = model.trained_feature_indices.iter().find(|&&j| j >= x.ncols()) {
        return Err(ModelError::MissingFeature {
            index: j,
            available: x.ncols(),
        });
    }
    Ok(x.rows()
        .into_iter()
        .map(|row| {
            let z = model
                .trained_feature_indices
                .iter()
                .zip(&model.weights)
                .fold(model.bias, |acc, (&j, w)| acc + w * row[j]);
            sigmoid(z)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        /// Sample-weighted Gini decrease: `n·g − n_l·g_l − n_r·g_r`.
        weighted_decrease: f64,
        n_samples: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        positive_fraction: f64,
        n_samples: usize,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => 1 + left.n_nodes() + right.n_nodes(),
        }
    }

    fn predict(&self, row: &dyn Fn(usize) -> f64) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf {
                    positive_fraction, ..
                } => return *positive_fraction,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row(*feature) <= *threshold { left } else { right };
                }
            }
        }
    }

    fn visit_splits(&self, f: &mut dyn FnMut(usize, f64)) {
        if let TreeNode::Split {
            feature,
            weighted_decrease,
            left,
            right,
            ..
        } = self
        {
            f(*feature, *weighted_decrease);
            left.visit_splits(f);
            right.visit_splits(f);
        }
    }
}

/// Width of one preorder record: `[is_split, feature, threshold, value, n_samples, weighted_decrease]`.
pub const TREE_RECORD_WIDTH: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 10,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub root: TreeNode,
    pub max_depth: usize,
    pub n_features: usize,
}

impl DecisionTreeModel {
    /// Preorder node records, `TREE_RECORD_WIDTH` values each.
    pub fn to_preorder(&self) -> Vec<f64> {
        fn walk(node: &TreeNode, out: &mut Vec<f64>) {
            match node {
                TreeNode::Leaf {
                    positive_fraction,
                    n_samples,
                } => out.extend([0.0, 0.0, 0.0, *positive_fraction, *n_samples as f64, 0.0]),
                TreeNode::Split {
                    feature,
                    threshold,
                    weighted_decrease,
                    n_samples,
                    left,
                    right,
                } => {
                    out.extend([
                        1.0,
                        *feature as f64,
                        *threshold,
                        0.0,
                        *n_samples as f64,
                        *weighted_decrease,
                    ]);
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn from_preorder(records: &[f64], max_depth: usize, n_features: usize) -> Result<Self> {
        if !records.len().is_multiple_of(TREE_RECORD_WIDTH) {
            return Err(ModelError::MalformedTree(format!(
                "{} values is not a whole number of records",
                records.len()
            )));
        }
        fn read(records: &[f64], pos: &mut usize, n_features: usize) -> Result<TreeNode> {
            let start = *pos * TREE_RECORD_WIDTH;
            let Some(r) = records.get(start..start + TREE_RECORD_WIDTH) else {
                return Err(ModelError::MalformedTree("truncated node list".into()));
            };
            *pos += 1;
            if r[0] == 0.0 {
                Ok(TreeNode::Leaf {
                    positive_fraction: r[3],
                    n_samples: r[4] as usize,
                })
            } else {
                let feature = r[1] as usize;
                if feature >= n_features {
                    return Err(ModelError::MalformedTree(format!(
                        "split on feature {feature} of {n_features}"
                    )));
                }
                let left = Box::new(read(records, pos, n_features)?);
                let right = Box::new(read(records, pos, n_features)?);
                Ok(TreeNode::Split {
                    feature,
                    threshold: r[2],
                    weighted_decrease: r[5],
                    n_samples: r[4] as usize,
                    left,
                    right,
                })
            }
        }
        let mut pos = 0;
        let root = read(records, &mut pos, n_features)?;
        if pos * TREE_RECORD_WIDTH != records.len() {
            return Err(ModelError::MalformedTree("trailing records".into()));
        }
        Ok(Self {
            root,
            max_depth,
            n_features,
        })
    }
}

/// Column-major copy of the training matrix shared by all tree builders.
struct Columns {
    cols: Vec<Vec<f64>>,
}

impl Columns {
    fn new(x: &Array2<f64>) -> Self {
        Self {
            cols: (0..x.ncols()).map(|j| x.column(j).to_vec()).collect(),
        }
    }
}

struct TreeBuilder<'a> {
    columns: &'a Columns,
    y: &'a [u8],
    max_depth: usize,
    min_samples_split: usize,
    /// Features examined per split; all features when `None`.
    feature_subsample: Option<usize>,
    rng: Option<ChaCha8Rng>,
    scratch: Vec<usize>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl TreeBuilder<'_> {
    fn build(&mut self, rows: &mut [usize], depth: usize) -> TreeNode {
        let n = rows.len();
        let pos = rows.iter().filter(|&&i| self.y[i] == 1).count();
        let leaf = TreeNode::Leaf {
            positive_fraction: pos as f64 / n as f64,
            n_samples: n,
        };
        if depth >= self.max_depth || pos == 0 || pos == n || n < self.min_samples_split.max(2) {
            return leaf;
        }
        let Some(best) = self.best_split(rows, pos) else {
            return leaf;
        };
        let col = &self.columns.cols[best.feature];
        // Stable partition: rows going left keep their relative order.
        let (mut left, mut right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| col[i] <= best.threshold);
        let left_node = self.build(&mut left, depth + 1);
        let right_node = self.build(&mut right, depth + 1);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            weighted_decrease: best.gain * n as f64,
            n_samples: n,
            left: Box::new(left_node),
            right: Box::new(right_node),
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let n_features = self.columns.cols.len();
        match (self.feature_subsample, self.rng.as_mut()) {
            (Some(k), Some(rng)) if k < n_features => {
                let mut f = sample(rng, n_features, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..n_features).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], pos: usize) -> Option<BestSplit> {
        let n = rows.len() as f64;
        let parent = gini((rows.len() - pos) as f64, pos as f64);
        let mut best: Option<BestSplit> = None;
        // Impure nodes always split when any threshold exists, even at zero
        // gain, so XOR-like interactions are reachable.
        let mut best_gain = f64::NEG_INFINITY;
        for feature in self.candidate_features() {
            let col = &self.columns.cols[feature];
            self.scratch.clear();
            self.scratch.extend_from_slice(rows);
            self.scratch.sort_unstable_by(|&a, &b| col[a].total_cmp(&col[b]));
            let (mut left_neg, mut left_pos) = (0usize, 0usize);
            for w in 0..self.scratch.len() - 1 {
                let i = self.scratch[w];
                if self.y[i] == 1 {
                    left_pos += 1;
                } else {
                    left_neg += 1;
                }
                let (lo, hi) = (col[i], col[self.scratch[w + 1]]);
                if lo == hi {
                    continue;
                }
                let n_left = (left_neg + left_pos) as f64;
                let right_pos = pos - left_pos;
                let right_neg = rows.len() - pos - left_neg;
                let n_right = n - n_left;
                let child = (n_left * gini(left_neg as f64, left_pos as f64)
                    + n_right * gini(right_neg as f64, right_pos as f64))
                    / n;
                let gain = parent - child;
                if gain > best_gain {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best_gain = gain;
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Greedy CART with Gini gain over midpoints of consecutive distinct values.
/// Ties go to the lowest feature index, then the lowest threshold.
pub fn tree_fit(x: &Array2<f64>, y: &[u8], config: &TreeConfig) -> Result<DecisionTreeModel> {
    check_xy(x, y)?;
    let columns = Columns::new(x);
    let mut rows: Vec<usize> = (0..y.len()).collect();
    let mut builder = TreeBuilder {
        columns: &columns,
        y,
        max_depth: config.max_depth,
        min_samples_split: config.min_samples_split,
        feature_subsample: None,
        rng: None,
        scratch: Vec::with_capacity(y.len()),
    };
    let root = builder.build(&mut rows, 0);
    Ok(DecisionTreeModel {
        root,
        max_depth: config.max_depth,
        n_features: x.ncols(),
    })
}

fn check_width(expected: usize, x: &Array2<f64>) -> Result<()> {
    if x.ncols() != expected {
        return Err(ModelError::FeatureCount {
            expected,
            found: x.ncols(),
        });
    }
    Ok(())
}

pub fn tree_predict_proba(model: &DecisionTreeModel, x: &Array2<f64>) -> Result<Vec<f64>> {
    check_width(model.n_features, x)?;
    Ok(x.rows()
        .into_iter()
        .map(|row| model.root.predict(&|j| row[j]))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features examined per split; `⌈√n_features⌉` when unset.
    pub feature_subsample: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_estimators: 200,
            max_depth: 10,
            min_samples_split: 2,
            feature_subsample: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTreeModel>,
    pub n_estimators: usize,
    /// RNG stream index of each tree under the forest seed.
    pub bootstrap_seeds: Vec<u64>,
    pub feature_subsample: usize,
    pub n_features: usize,
}

/// Bagged CART ensemble. Tree `t` draws its bootstrap sample and split
/// features from stream `t` of a ChaCha generator keyed by `config.seed`, so
/// the result is independent of how many threads build the trees.
pub fn forest_fit(x: &Array2<f64>, y: &[u8], config: &ForestConfig) -> Result<RandomForestModel> {
    check_xy(x, y)?;
    if config.n_estimators == 0 {
        return Err(ModelError::InvalidConfig("n_estimators must be positive".into()));
    }
    let n_features = x.ncols();
    let feature_subsample = config
        .feature_subsample
        .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
        .clamp(1, n_features.max(1));
    let columns = Columns::new(x);
    let n = y.len();
    let trees: Vec<DecisionTreeModel> = (0..config.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let mut rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut builder = TreeBuilder {
                columns: &columns,
                y,
                max_depth: config.max_depth,
                min_samples_split: config.min_samples_split,
                feature_subsample: Some(feature_subsample),
                rng: Some(rng),
                scratch: Vec::with_capacity(n),
            };
            DecisionTreeModel {
                root: builder.build(&mut rows, 0),
                max_depth: config.max_depth,
                n_features,
            }
        })
        .collect();
    Ok(RandomForestModel {
        trees,
        n_estimators: config.n_estimators,
        bootstrap_seeds: (0..config.n_estimators as u64).collect(),
        feature_subsample,
        n_features,
    })
}

/// Mean of the member trees' leaf probabilities.
pub fn forest_predict_proba(model: &RandomForestModel, x: &Array2<f64>) -> Result<Vec<f64>> {
    check_width(model.n_features, x)?;
    let mut total = vec![0.0; x.nrows()];
    for tree in &model.trees {
        for (acc, row) in total.iter_mut().zip(x.rows()) {
            *acc += tree.root.predict(&|j| row[j]);
        }
    }
    let k = model.trees.len() as f64;
    Ok(total.into_iter().map(|s| s / k).collect())
}

/// Gini decrease attributed to each feature over every split of every tree,
/// normalized to sum to one (all zeros when no tree ever split).
pub fn forest_feature_importance(model: &RandomForestModel) -> Vec<f64> {
    let mut importance = vec![0.0; model.n_features];
    for tree in &model.trees {
        tree.root.visit_splits(&mut |f, decrease| importance[f] += decrease);
    }
    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        importance.iter_mut().for_each(|v| *v /= total);
    }
    importance
}
