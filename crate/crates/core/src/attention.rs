//! The two attention classifiers and their shared training loop.
//!
//! Both models treat a row as a sequence of length one, so every attention
//! weight is exactly 1; the attention blocks still learn through their value
//! and output projections.
//!
//! - The transformer projects the feature vector to `model_dim`, runs
//!   `num_layers` encoder blocks (attention and feed-forward, each followed by
//!   a residual add and layer norm), averages over the sequence axis and ends
//!   in a sigmoid unit.
//! - The TabTransformer embeds every categorical column, concatenates the
//!   embeddings with the numerical block, applies attention and layer norm,
//!   then a ReLU layer, dropout and a sigmoid unit.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{adam_step, Activation, AdamState, AttentionVars, AutodiffError, Tape, Tensor, Var};
use crate::dataset::Dataset;

#[derive(Debug, Error, PartialEq)]
pub enum AttentionError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("input has {found} columns, model expects {expected}")]
    Width { expected: usize, found: usize },
    #[error("categorical feature {feature} has index {index}, cardinality is {cardinality}")]
    CategoryOutOfRange {
        feature: usize,
        index: usize,
        cardinality: usize,
    },
    #[error("parameters do not match the model: {0}")]
    ParamMismatch(String),
    #[error("{0} split is empty or lacks one of the classes")]
    BadSplit(&'static str),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

pub type Result<T, E = AttentionError> = std::result::Result<T, E>;

const LAYER_NORM_EPSILON: f64 = 1e-6;
/// Minimum drop in validation loss that counts as an improvement.
pub const EARLY_STOP_MIN_DELTA: f64 = 1e-6;
/// Rows per forward pass at inference time.
const INFERENCE_CHUNK: usize = 1024;

fn check_rate(name: &str, v: f64) -> Result<()> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(AttentionError::InvalidConfig(format!("{name} {v} outside [0, 1)")))
    }
}

fn check_training(batch_size: usize, learning_rate: f64, l2: f64, epochs: usize) -> Result<()> {
    let err = |m: String| Err(AttentionError::InvalidConfig(m));
    if batch_size == 0 {
        return err("batch_size must be positive".into());
    }
    if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
        return err(format!("learning_rate {learning_rate} must be finite and >= 0"));
    }
    if !(l2 >= 0.0 && l2.is_finite()) {
        return err(format!("l2_reg {l2} must be finite and >= 0"));
    }
    if epochs == 0 {
        return err("epochs must be positive".into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformerConfig {
    /// Width of the input rows; 0 until the front end fixes it.
    pub input_dim: usize,
    pub model_dim: usize,
    pub num_heads: usize,
    pub ff_dim: usize,
    pub num_layers: usize,
    pub dropout_rate: f64,
    pub l2_reg: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub early_stop_patience: usize,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        Self {
            input_dim: 0,
            model_dim: 128,
            num_heads: 4,
            ff_dim: 128,
            num_layers: 2,
            dropout_rate: 0.3,
            l2_reg: 1e-4,
            batch_size: 2048,
            learning_rate: 1e-6,
            epochs: 40,
            early_stop_patience: 2,
        }
    }
}

impl TransformerConfig {
    /// Checks the hyperparameters; `input_dim` is checked separately by
    /// [`init_params`] since it is usually filled in at run time.
    pub fn validate(&self) -> Result<()> {
        if self.num_heads == 0 || self.model_dim == 0 || !self.model_dim.is_multiple_of(self.num_heads) {
            return Err(AttentionError::InvalidConfig(format!(
                "model_dim {} must be a positive multiple of num_heads {}",
                self.model_dim, self.num_heads
            )));
        }
        if self.ff_dim == 0 || self.num_layers == 0 {
            return Err(AttentionError::InvalidConfig("ff_dim and num_layers must be positive".into()));
        }
        check_rate("dropout_rate", self.dropout_rate)?;
        check_training(self.batch_size, self.learning_rate, self.l2_reg, self.epochs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TabTransformerConfig {
    pub embedding_dim: usize,
    pub num_heads: usize,
    pub ff_dim: usize,
    pub num_layers: usize,
    pub dropout_rate: f64,
    pub l2_reg: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub early_stop_patience: usize,
    /// Filled in at run time from the selected columns.
    pub n_numerical: usize,
    pub categorical_cardinalities: Vec<usize>,
}

impl Default for TabTransformerConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 8,
            num_heads: 4,
            ff_dim: 128,
            num_layers: 1,
            dropout_rate: 0.2,
            l2_reg: 0.01,
            batch_size: 512,
            learning_rate: 1e-7,
            epochs: 40,
            early_stop_patience: 2,
            n_numerical: 0,
            categorical_cardinalities: Vec::new(),
        }
    }
}

impl TabTransformerConfig {
    /// Zero channels appended to the numerical block so the concatenated width
    /// divides evenly among the heads.
    pub fn padding(&self) -> usize {
        let raw = self.n_numerical + self.embedding_dim * self.categorical_cardinalities.len();
        (self.num_heads - raw % self.num_heads) % self.num_heads
    }

    /// `n_numerical + padding + Σ embedding_dim`.
    pub fn total_dim(&self) -> usize {
        self.n_numerical + self.padding() + self.embedding_dim * self.categorical_cardinalities.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_heads == 0 || self.ff_dim == 0 || self.num_layers == 0 {
            return Err(AttentionError::InvalidConfig(
                "num_heads, ff_dim and num_layers must be positive".into(),
            ));
        }
        if self.embedding_dim == 0 && !self.categorical_cardinalities.is_empty() {
            return Err(AttentionError::InvalidConfig("embedding_dim must be positive".into()));
        }
        if let Some(j) = self.categorical_cardinalities.iter().position(|&c| c == 0) {
            return Err(AttentionError::InvalidConfig(format!("categorical feature {j} has cardinality 0")));
        }
        check_rate("dropout_rate", self.dropout_rate)?;
        check_training(self.batch_size, self.learning_rate, self.l2_reg, self.epochs)
    }
}

/// Either classifier with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeepModel {
    Transformer(TransformerConfig),
    TabTransformer(TabTransformerConfig),
}

impl DeepModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            DeepModel::Transformer(c) => c.validate(),
            DeepModel::TabTransformer(c) => c.validate(),
        }
    }

    fn training(&self) -> (usize, f64, f64, usize, usize) {
        match self {
            DeepModel::Transformer(c) => (c.batch_size, c.learning_rate, c.l2_reg, c.epochs, c.early_stop_patience),
            DeepModel::TabTransformer(c) => (c.batch_size, c.learning_rate, c.l2_reg, c.epochs, c.early_stop_patience),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.training().1
    }
}

/// Ordered, named parameter tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
}

impl ModelParams {
    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.position(name).map(|i| &self.tensors[i])
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn n_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Same names and shapes with every value set to zero.
    pub fn zeroed(&self) -> Self {
        Self {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    Glorot,
    Zeros,
    Ones,
    Embedding,
}

/// Parameter layout as `(name, shape, initializer)`.
fn layout(model: &DeepModel) -> Result<Vec<(String, Vec<usize>, Init)>> {
    model.validate()?;
    let mut out = Vec::new();
    let mut push = |name: String, shape: Vec<usize>, init: Init| out.push((name, shape, init));
    let attention = |push: &mut dyn FnMut(String, Vec<usize>, Init), prefix: &str, d: usize| {
        for p in ["q", "k", "v", "o"] {
            push(format!("{prefix}.w{p}"), vec![d, d], Init::Glorot);
            push(format!("{prefix}.b{p}"), vec![d], Init::Zeros);
        }
    };
    let norm = |push: &mut dyn FnMut(String, Vec<usize>, Init), prefix: &str, d: usize| {
        push(format!("{prefix}.gamma"), vec![d], Init::Ones);
        push(format!("{prefix}.beta"), vec![d], Init::Zeros);
    };
    match model {
        DeepModel::Transformer(c) => {
            if c.input_dim == 0 {
                return Err(AttentionError::InvalidConfig("input_dim must be positive".into()));
            }
            let d = c.model_dim;
            push("input.w".into(), vec![c.input_dim, d], Init::Glorot);
            push("input.b".into(), vec![d], Init::Zeros);
            for l in 0..c.num_layers {
                attention(&mut push, &format!("layer{l}.attention"), d);
                norm(&mut push, &format!("layer{l}.norm1"), d);
                push(format!("layer{l}.ff1.w"), vec![d, c.ff_dim], Init::Glorot);
                push(format!("layer{l}.ff1.b"), vec![c.ff_dim], Init::Zeros);
                push(format!("layer{l}.ff2.w"), vec![c.ff_dim, d], Init::Glorot);
                push(format!("layer{l}.ff2.b"), vec![d], Init::Zeros);
                norm(&mut push, &format!("layer{l}.norm2"), d);
            }
            push("head.w".into(), vec![d, 1], Init::Glorot);
            push("head.b".into(), vec![1], Init::Zeros);
        }
        DeepModel::TabTransformer(c) => {
            let d = c.total_dim();
            if d == 0 {
                return Err(AttentionError::InvalidConfig("no input features".into()));
            }
            for (j, &card) in c.categorical_cardinalities.iter().enumerate() {
                push(format!("embedding{j}"), vec![card, c.embedding_dim], Init::Embedding);
            }
            for l in 0..c.num_layers {
                attention(&mut push, &format!("layer{l}.attention"), d);
                norm(&mut push, &format!("layer{l}.norm"), d);
            }
            push("ff.w".into(), vec![d, c.ff_dim], Init::Glorot);
            push("ff.b".into(), vec![c.ff_dim], Init::Zeros);
            push("head.w".into(), vec![c.ff_dim, 1], Init::Glorot);
            push("head.b".into(), vec![1], Init::Zeros);
        }
    }
    Ok(out)
}

/// Glorot-uniform weights, zero biases, unit layer-norm gains, zero offsets
/// and `N(0, 0.05)` embeddings, drawn in layout order from `seed`.
pub fn init_params(model: &DeepModel, seed: u64) -> Result<ModelParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 0.05).expect("valid normal");
    let mut names = Vec::new();
    let mut tensors = Vec::new();
    for (name, shape, init) in layout(model)? {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = match init {
            Init::Glorot => {
                let limit = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                (0..n).map(|_| rng.random_range(-limit..=limit)).collect()
            }
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::Embedding => (0..n).map(|_| normal.sample(&mut rng)).collect(),
        };
        names.push(name);
        tensors.push(Tensor::new(shape, data)?);
    }
    Ok(ModelParams { names, tensors })
}

fn check_params(model: &DeepModel, params: &ModelParams) -> Result<()> {
    let expected = layout(model)?;
    if expected.len() != params.len() {
        return Err(AttentionError::ParamMismatch(format!(
            "expected {} tensors, got {}",
            expected.len(),
            params.len()
        )));
    }
    for ((name, shape, _), (n, t)) in expected.iter().zip(params.names.iter().zip(&params.tensors)) {
        if name != n || shape.as_slice() != t.shape() {
            return Err(AttentionError::ParamMismatch(format!(
                "expected {name} {shape:?}, got {n} {:?}",
                t.shape()
            )));
        }
    }
    Ok(())
}

/// Numerical block plus categorical codes (one column per categorical
/// feature). The transformer reads only the numerical block.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub numerical: Array2<f64>,
    pub categorical: Array2<usize>,
}

impl ModelInput {
    pub fn numerical_only(numerical: Array2<f64>) -> Self {
        let n = numerical.nrows();
        Self {
            numerical,
            categorical: Array2::zeros((n, 0)),
        }
    }

    /// Every column as a value in [0, 1], categorical codes rescaled.
    pub fn dense(dataset: &Dataset) -> Self {
        Self::numerical_only(dataset.dense_view())
    }

    /// Numerical columns as values and categorical columns as codes, along
    /// with the categorical cardinalities in column order.
    pub fn tabular(dataset: &Dataset) -> (Self, Vec<usize>) {
        let meta = dataset.meta();
        let num: Vec<usize> = (0..meta.len()).filter(|&j| !meta[j].is_categorical()).collect();
        let cat: Vec<usize> = (0..meta.len()).filter(|&j| meta[j].is_categorical()).collect();
        let x = dataset.x();
        let input = Self {
            numerical: x.select(Axis(1), &num),
            categorical: x.select(Axis(1), &cat).mapv(|v| v as usize),
        };
        (input, cat.iter().map(|&j| meta[j].cardinality).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.numerical.nrows()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            numerical: self.numerical.select(Axis(0), rows),
            categorical: self.categorical.select(Axis(0), rows),
        }
    }
}

/// A named intermediate shape from a forward pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub layer: String,
    pub shape: Vec<usize>,
}

struct Graph {
    probabilities: Var,
    attention: Vec<Var>,
    trace: Vec<ShapeRecord>,
}

struct Builder<'a> {
    tape: &'a mut Tape,
    names: &'a [String],
    vars: &'a [Var],
    trace: Vec<ShapeRecord>,
}

impl Builder<'_> {
    fn v(&self, name: &str) -> Var {
        let i = self.names.iter().position(|n| n == name).expect("layout has every name");
        self.vars[i]
    }

    fn note(&mut self, layer: &str, v: Var) {
        self.trace.push(ShapeRecord {
            layer: layer.to_string(),
            shape: self.tape.shape(v).to_vec(),
        });
    }

    fn attention_vars(&self, prefix: &str) -> AttentionVars {
        AttentionVars {
            wq: self.v(&format!("{prefix}.wq")),
            bq: self.v(&format!("{prefix}.bq")),
            wk: self.v(&format!("{prefix}.wk")),
            bk: self.v(&format!("{prefix}.bk")),
            wv: self.v(&format!("{prefix}.wv")),
            bv: self.v(&format!("{prefix}.bv")),
            wo: self.v(&format!("{prefix}.wo")),
            bo: self.v(&format!("{prefix}.bo")),
        }
    }

    fn norm(&mut self, x: Var, prefix: &str) -> Result<Var> {
        let (g, b) = (self.v(&format!("{prefix}.gamma")), self.v(&format!("{prefix}.beta")));
        Ok(self.tape.layer_norm(x, g, b, LAYER_NORM_EPSILON)?)
    }

    fn dense(&mut self, x: Var, prefix: &str, activation: Activation) -> Result<Var> {
        let (w, b) = (self.v(&format!("{prefix}.w")), self.v(&format!("{prefix}.b")));
        Ok(self.tape.dense(x, w, b, activation)?)
    }
}

fn build_transformer(
    tape: &mut Tape,
    c: &TransformerConfig,
    names: &[String],
    vars: &[Var],
    x: &Array2<f64>,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<Graph> {
    if x.ncols() != c.input_dim {
        return Err(AttentionError::Width {
            expected: c.input_dim,
            found: x.ncols(),
        });
    }
    let batch = x.nrows();
    let mut b = Builder {
        tape,
        names,
        vars,
        trace: Vec::new(),
    };
    let input = b.tape.constant(Tensor::new(vec![batch, c.input_dim], x.iter().copied().collect())?);
    b.note("input", input);
    let h = b.dense(input, "input", Activation::None)?;
    b.note("dense", h);
    let mut h = b.tape.reshape(h, &[batch, 1, c.model_dim])?;
    b.note("sequence_expansion", h);
    let mut attention = Vec::new();
    for l in 0..c.num_layers {
        let vars = b.attention_vars(&format!("layer{l}.attention"));
        let (a, w) = b.tape.multi_head_attention(h, &vars, c.num_heads)?;
        attention.push(w);
        b.note("multi_head_attention", a);
        let a = b.tape.dropout(a, c.dropout_rate, training, rng)?;
        let sum = b.tape.add(h, a)?;
        h = b.norm(sum, &format!("layer{l}.norm1"))?;
        b.note("residual_norm", h);
        let f = b.dense(h, &format!("layer{l}.ff1"), Activation::Relu)?;
        let f = b.dense(f, &format!("layer{l}.ff2"), Activation::None)?;
        b.note("feed_forward", f);
        let f = b.tape.dropout(f, c.dropout_rate, training, rng)?;
        let sum = b.tape.add(h, f)?;
        h = b.norm(sum, &format!("layer{l}.norm2"))?;
        b.note("residual_norm", h);
    }
    let pooled = b.tape.global_average_pool(h)?;
    b.note("global_average_pooling", pooled);
    let p = b.dense(pooled, "head", Activation::Sigmoid)?;
    b.note("output", p);
    Ok(Graph {
        probabilities: p,
        attention,
        trace: b.trace,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_tabtransformer(
    tape: &mut Tape,
    c: &TabTransformerConfig,
    names: &[String],
    vars: &[Var],
    x_num: &Array2<f64>,
    x_cat: &Array2<usize>,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<Graph> {
    if x_num.ncols() != c.n_numerical {
        return Err(AttentionError::Width {
            expected: c.n_numerical,
            found: x_num.ncols(),
        });
    }
    if x_cat.ncols() != c.categorical_cardinalities.len() {
        return Err(AttentionError::Width {
            expected: c.categorical_cardinalities.len(),
            found: x_cat.ncols(),
        });
    }
    if x_cat.nrows() != x_num.nrows() {
        return Err(AttentionError::Width {
            expected: x_num.nrows(),
            found: x_cat.nrows(),
        });
    }
    for (feature, (col, &cardinality)) in x_cat.columns().into_iter().zip(&c.categorical_cardinalities).enumerate() {
        if let Some(&index) = col.iter().find(|&&i| i >= cardinality) {
            return Err(AttentionError::CategoryOutOfRange {
                feature,
                index,
                cardinality,
            });
        }
    }
    let batch = x_num.nrows();
    let d = c.total_dim();
    let mut b = Builder {
        tape,
        names,
        vars,
        trace: Vec::new(),
    };
    let mut parts = Vec::new();
    if c.n_numerical > 0 {
        let num = b.tape.constant(Tensor::new(vec![batch, c.n_numerical], x_num.iter().copied().collect())?);
        b.note("numerical_input", num);
        parts.push(num);
    }
    if c.padding() > 0 {
        parts.push(b.tape.constant(Tensor::zeros(&[batch, c.padding()])));
    }
    for (j, col) in x_cat.columns().into_iter().enumerate() {
        let indices: Vec<usize> = col.to_vec();
        let table = b.v(&format!("embedding{j}"));
        let e = b.tape.gather_rows(table, &indices)?;
        b.note("embedding", e);
        parts.push(e);
    }
    let joined = b.tape.concat_last(&parts)?;
    b.note("concatenation", joined);
    let mut h = b.tape.reshape(joined, &[batch, 1, d])?;
    b.note("reshape", h);
    let mut attention = Vec::new();
    for l in 0..c.num_layers {
        let vars = b.attention_vars(&format!("layer{l}.attention"));
        let (a, w) = b.tape.multi_head_attention(h, &vars, c.num_heads)?;
        attention.push(w);
        b.note("multi_head_attention", a);
        h = b.norm(a, &format!("layer{l}.norm"))?;
        b.note("layer_normalization", h);
    }
    let f = b.dense(h, "ff", Activation::Relu)?;
    b.note("dense_relu", f);
    let f = b.tape.dropout(f, c.dropout_rate, training, rng)?;
    let p = b.dense(f, "head", Activation::Sigmoid)?;
    let p = b.tape.reshape(p, &[batch, 1])?;
    b.note("output", p);
    Ok(Graph {
        probabilities: p,
        attention,
        trace: b.trace,
    })
}

fn build(
    tape: &mut Tape,
    model: &DeepModel,
    names: &[String],
    vars: &[Var],
    input: &ModelInput,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<Graph> {
    match model {
        DeepModel::Transformer(c) => build_transformer(tape, c, names, vars, &input.numerical, training, rng),
        DeepModel::TabTransformer(c) => {
            build_tabtransformer(tape, c, names, vars, &input.numerical, &input.categorical, training, rng)
        }
    }
}

/// Names of the dense-layer kernels that carry the L2 penalty.
fn regularized(model: &DeepModel, names: &[String]) -> Vec<usize> {
    let is_kernel = |n: &str| match model {
        DeepModel::Transformer(_) => n == "input.w" || n == "head.w" || n.ends_with(".ff1.w") || n.ends_with(".ff2.w"),
        DeepModel::TabTransformer(_) => n == "ff.w" || n == "head.w",
    };
    (0..names.len()).filter(|&i| is_kernel(&names[i])).collect()
}

/// Output of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub probabilities: Vec<f64>,
    /// Per attention layer, weights shaped `[batch, heads, seq, seq]`.
    pub attention_weights: Vec<Tensor>,
    pub trace: Vec<ShapeRecord>,
}

fn forward(model: &DeepModel, params: &ModelParams, input: &ModelInput, training: bool, rng: &mut dyn RngCore) -> Result<ForwardOutput> {
    check_params(model, params)?;
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.tensors.iter().map(|t| tape.constant(t.clone())).collect();
    let g = build(&mut tape, model, &params.names, &vars, input, training, rng)?;
    Ok(ForwardOutput {
        probabilities: tape.value(g.probabilities).data().to_vec(),
        attention_weights: g.attention.iter().map(|&w| tape.value(w).clone()).collect(),
        trace: g.trace,
    })
}

/// Transformer probabilities for each row of `x`. Dropout draws from `rng`
/// only when `training` is set.
pub fn transformer_forward(
    config: &TransformerConfig,
    params: &ModelParams,
    x: &Array2<f64>,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<ForwardOutput> {
    let model = DeepModel::Transformer(config.clone());
    forward(&model, params, &ModelInput::numerical_only(x.clone()), training, rng)
}

/// TabTransformer probabilities from the numerical block and categorical codes.
pub fn tabtransformer_forward(
    config: &TabTransformerConfig,
    params: &ModelParams,
    x_num: &Array2<f64>,
    x_cat: &Array2<usize>,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<ForwardOutput> {
    let model = DeepModel::TabTransformer(config.clone());
    let input = ModelInput {
        numerical: x_num.clone(),
        categorical: x_cat.clone(),
    };
    forward(&model, params, &input, training, rng)
}

/// Per-epoch loss and accuracy on the training and validation splits.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurves {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}

impl TrainingCurves {
    pub fn epochs(&self) -> usize {
        self.val_loss.len()
    }

    /// Writes `epoch,train_loss,val_loss,train_acc,val_acc` with 1-based epochs.
    pub fn write_csv(&self, writer: impl std::io::Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "train_loss", "val_loss", "train_acc", "val_acc"])?;
        for e in 0..self.epochs() {
            w.write_record([
                (e + 1).to_string(),
                self.train_loss[e].to_string(),
                self.val_loss[e].to_string(),
                self.train_accuracy[e].to_string(),
                self.val_accuracy[e].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops once the monitored loss has failed to improve by more than
/// `min_delta` for `patience` consecutive epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub min_delta: f64,
    pub best: f64,
    pub best_epoch: Option<usize>,
    pub wait: usize,
    epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self {
            patience,
            min_delta,
            best: f64::INFINITY,
            best_epoch: None,
            wait: 0,
            epoch: 0,
        }
    }

    pub fn observe(&mut self, loss: f64) -> StopDecision {
        let epoch = self.epoch;
        self.epoch += 1;
        if loss < self.best - self.min_delta {
            self.best = loss;
            self.best_epoch = Some(epoch);
            self.wait = 0;
            return StopDecision::Improved;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model: DeepModel,
    pub params: ModelParams,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Rows and labels of one split.
#[derive(Debug, Clone, Copy)]
pub struct Split<'a> {
    pub input: &'a ModelInput,
    pub y: &'a [u8],
}

impl Split<'_> {
    fn check(&self, name: &'static str) -> Result<()> {
        let pos = self.y.iter().filter(|&&v| v == 1).count();
        if self.y.is_empty() || pos == 0 || pos == self.y.len() || self.input.n_rows() != self.y.len() {
            return Err(AttentionError::BadSplit(name));
        }
        Ok(())
    }
}

/// Loss and accuracy with dropout off, in chunks. The loss includes the L2
/// term so it is comparable with the training loss.
fn evaluate(model: &DeepModel, params: &ModelParams, split: Split<'_>) -> Result<(f64, f64, Vec<f64>)> {
    let (_, _, l2, _, _) = model.training();
    let probs = predict_unchecked(model, params, split.input)?;
    let mut bce = 0.0;
    let mut correct = 0usize;
    for (&p, &y) in probs.iter().zip(split.y) {
        let pc = p.clamp(crate::autodiff::BCE_EPSILON, 1.0 - crate::autodiff::BCE_EPSILON);
        bce -= if y == 1 { pc.ln() } else { (1.0 - pc).ln() };
        if (p >= 0.5) == (y == 1) {
            correct += 1;
        }
    }
    let n = split.y.len() as f64;
    let penalty: f64 = regularized(model, &params.names)
        .iter()
        .map(|&i| params.tensors[i].data().iter().map(|v| v * v).sum::<f64>())
        .sum();
    Ok((bce / n + l2 * penalty, correct as f64 / n, probs))
}

fn predict_unchecked(model: &DeepModel, params: &ModelParams, input: &ModelInput) -> Result<Vec<f64>> {
    let mut idle = ChaCha8Rng::seed_from_u64(0);
    let mut out = Vec::with_capacity(input.n_rows());
    let rows: Vec<usize> = (0..input.n_rows()).collect();
    for chunk in rows.chunks(INFERENCE_CHUNK) {
        out.extend(forward(model, params, &input.select(chunk), false, &mut idle)?.probabilities);
    }
    Ok(out)
}

/// Probability of the positive class for every row, dropout off.
pub fn predict_proba(model: &TrainedModel, input: &ModelInput) -> Result<Vec<f64>> {
    predict_unchecked(&model.model, &model.params, input)
}

/// Mini-batch Adam on BCE + L2. Rows are reshuffled every epoch and the last
/// short batch is kept. After each epoch the curves are extended; training
/// stops early per [`EarlyStopping`] and the parameters of the epoch with the
/// lowest validation loss are returned.
pub fn train<R: Rng>(
    params: ModelParams,
    model: &DeepModel,
    train_split: Split<'_>,
    val_split: Split<'_>,
    rng: &mut R,
) -> Result<(TrainedModel, TrainingCurves)> {
    check_params(model, &params)?;
    train_split.check("training")?;
    val_split.check("validation")?;
    let (batch_size, learning_rate, l2, epochs, patience) = model.training();
    let reg = regularized(model, &params.names);
    let sizes: Vec<usize> = params.tensors.iter().map(Tensor::len).collect();
    let mut adam = AdamState::new(&sizes, learning_rate);
    let mut params = params;
    let mut best = params.clone();
    let mut stopper = EarlyStopping::new(patience.max(1), EARLY_STOP_MIN_DELTA);
    let mut curves = TrainingCurves::default();
    let mut order: Vec<usize> = (0..train_split.y.len()).collect();

    for epoch in 0..epochs {
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (batch_index, rows) in order.chunks(batch_size).enumerate() {
            let input = train_split.input.select(rows);
            let targets: Vec<f64> = rows.iter().map(|&i| f64::from(train_split.y[i])).collect();
            let mut tape = Tape::new();
            let vars: Vec<Var> = params.tensors.iter().map(|t| tape.param(t.clone())).collect();
            let g = build(&mut tape, model, &params.names, &vars, &input, true, rng)?;
            let weights: Vec<Var> = reg.iter().map(|&i| vars[i]).collect();
            let loss = tape.bce_loss(g.probabilities, &targets, l2, &weights)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(AttentionError::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            loss_sum += value * rows.len() as f64;
            correct += tape
                .value(g.probabilities)
                .data()
                .iter()
                .zip(&targets)
                .filter(|(p, t)| (**p >= 0.5) == (**t == 1.0))
                .count();
            let grads = tape.backward(loss)?;
            let grads: Vec<Vec<f64>> = vars.iter().map(|&v| grads.get(v)).collect();
            let mut slots: Vec<&mut [f64]> = params.tensors.iter_mut().map(Tensor::data_mut).collect();
            adam_step(&mut slots, &grads, &mut adam)?;
        }
        let n = train_split.y.len() as f64;
        let (val_loss, val_acc, _) = evaluate(model, &params, val_split)?;
        curves.train_loss.push(loss_sum / n);
        curves.train_accuracy.push(correct as f64 / n);
        curves.val_loss.push(val_loss);
        curves.val_accuracy.push(val_acc);
        match stopper.observe(val_loss) {
            StopDecision::Improved => best = params.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    Ok((
        TrainedModel {
            model: model.clone(),
            params: best,
            best_epoch: stopper.best_epoch.unwrap_or(0),
        },
        curves,
    ))
}

/// Validation loss of a trained model, as recorded in the curves.
pub fn validation_loss(model: &TrainedModel, split: Split<'_>) -> Result<f64> {
    Ok(evaluate(&model.model, &model.params, split)?.0)
}

/// The training objective (mean BCE plus the L2 term) with dropout off, and
/// its gradient with respect to every parameter tensor.
pub fn objective_and_gradient(
    model: &DeepModel,
    params: &ModelParams,
    input: &ModelInput,
    y: &[u8],
) -> Result<(f64, Vec<Tensor>)> {
    check_params(model, params)?;
    if input.n_rows() != y.len() {
        return Err(AttentionError::BadSplit("objective"));
    }
    let (_, _, l2, _, _) = model.training();
    let targets: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.tensors.iter().map(|t| tape.param(t.clone())).collect();
    let g = build(&mut tape, model, &params.names, &vars, input, false, &mut ChaCha8Rng::seed_from_u64(0))?;
    let weights: Vec<Var> = regularized(model, &params.names).iter().map(|&i| vars[i]).collect();
    let loss = tape.bce_loss(g.probabilities, &targets, l2, &weights)?;
    let grads = tape.backward(loss)?;
    Ok((tape.value(loss).item(), vars.iter().map(|&v| grads.tensor(v)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::testing::max_gradient_error;
    use crate::dataset::{generate_synthetic, SynthSpec};

    fn small_transformer(input_dim: usize) -> TransformerConfig {
        TransformerConfig {
            input_dim,
            model_dim: 8,
            num_heads: 2,
            ff_dim: 6,
            num_layers: 2,
            ..TransformerConfig::default()
        }
    }

    fn small_tab(n_numerical: usize, cards: Vec<usize>) -> TabTransformerConfig {
        TabTransformerConfig {
            embedding_dim: 3,
            num_heads: 2,
            ff_dim: 5,
            n_numerical,
            categorical_cardinalities: cards,
            ..TabTransformerConfig::default()
        }
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>())
    }

    fn idle() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn transformer_trace_matches_layer_table() {
        let c = TransformerConfig {
            input_dim: 45,
            ..TransformerConfig::default()
        };
        let params = init_params(&DeepModel::Transformer(c.clone()), 1).unwrap();
        let x = random_matrix(8, 45, &mut idle());
        let out = transformer_forward(&c, &params, &x, false, &mut idle()).unwrap();
        let layers: Vec<(&str, Vec<usize>)> = out.trace.iter().map(|r| (r.layer.as_str(), r.shape.clone())).collect();
        let block = [
            ("multi_head_attention", vec![8, 1, 128]),
            ("residual_norm", vec![8, 1, 128]),
            ("feed_forward", vec![8, 1, 128]),
            ("residual_norm", vec![8, 1, 128]),
        ];
        let mut expected = vec![
            ("input", vec![8, 45]),
            ("dense", vec![8, 128]),
            ("sequence_expansion", vec![8, 1, 128]),
        ];
        expected.extend(block.iter().cloned());
        expected.extend(block.iter().cloned());
        expected.push(("global_average_pooling", vec![8, 128]));
        expected.push(("output", vec![8, 1]));
        assert_eq!(layers, expected);
    }

    #[test]
    fn tabtransformer_trace_matches_layer_table() {
        let c = TabTransformerConfig {
            n_numerical: 6,
            categorical_cardinalities: vec![3, 4],
            ..TabTransformerConfig::default()
        };
        // 6 + 2·8 = 22, padded to 24 for 4 heads
        assert_eq!(c.padding(), 2);
        assert_eq!(c.total_dim(), 24);
        let params = init_params(&DeepModel::TabTransformer(c.clone()), 2).unwrap();
        let x_num = random_matrix(8, 6, &mut idle());
        let x_cat = Array2::from_shape_fn((8, 2), |(i, j)| (i + j) % 3);
        let out = tabtransformer_forward(&c, &params, &x_num, &x_cat, false, &mut idle()).unwrap();
        let layers: Vec<(&str, Vec<usize>)> = out.trace.iter().map(|r| (r.layer.as_str(), r.shape.clone())).collect();
        assert_eq!(
            layers,
            vec![
                ("numerical_input", vec![8, 6]),
                ("embedding", vec![8, 8]),
                ("embedding", vec![8, 8]),
                ("concatenation", vec![8, 24]),
                ("reshape", vec![8, 1, 24]),
                ("multi_head_attention", vec![8, 1, 24]),
                ("layer_normalization", vec![8, 1, 24]),
                ("dense_relu", vec![8, 1, 128]),
                ("output", vec![8, 1]),
            ]
        );
    }

    #[test]
    fn zero_parameters_give_one_half() {
        let c = small_transformer(5);
        let params = init_params(&DeepModel::Transformer(c.clone()), 0).unwrap().zeroed();
        let x = random_matrix(6, 5, &mut idle());
        let out = transformer_forward(&c, &params, &x, false, &mut idle()).unwrap();
        assert!(out.probabilities.iter().all(|&p| p == 0.5));

        let t = small_tab(3, vec![2, 5]);
        let params = init_params(&DeepModel::TabTransformer(t.clone()), 0).unwrap().zeroed();
        let x_cat = Array2::from_shape_fn((6, 2), |(i, _)| i % 2);
        let out = tabtransformer_forward(&t, &params, &random_matrix(6, 3, &mut idle()), &x_cat, false, &mut idle()).unwrap();
        assert!(out.probabilities.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn inference_is_deterministic_and_training_uses_dropout() {
        let c = small_transformer(4);
        let params = init_params(&DeepModel::Transformer(c.clone()), 3).unwrap();
        let x = random_matrix(10, 4, &mut idle());
        let a = transformer_forward(&c, &params, &x, false, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = transformer_forward(&c, &params, &x, false, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
        let t = transformer_forward(&c, &params, &x, true, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_ne!(a.probabilities, t.probabilities);
    }

    #[test]
    fn init_is_seeded_with_zero_biases() {
        let m = DeepModel::TabTransformer(small_tab(2, vec![3]));
        let a = init_params(&m, 5).unwrap();
        assert_eq!(a, init_params(&m, 5).unwrap());
        assert_ne!(a, init_params(&m, 6).unwrap());
        for (name, t) in a.names.iter().zip(&a.tensors) {
            if name.ends_with(".b") || name.contains(".attention.b") || name.ends_with(".beta") {
                assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
            }
            if name.ends_with(".gamma") {
                assert!(t.data().iter().all(|&v| v == 1.0), "{name}");
            }
        }
        assert_eq!(a.get("embedding0").unwrap().shape(), &[3, 3]);
    }

    #[test]
    fn initial_outputs_are_strict_probabilities() {
        let mut rng = idle();
        let c = TransformerConfig {
            input_dim: 20,
            ..TransformerConfig::default()
        };
        let x = random_matrix(200, 20, &mut rng);
        for seed in 0..5 {
            let params = init_params(&DeepModel::Transformer(c.clone()), seed).unwrap();
            let out = transformer_forward(&c, &params, &x, false, &mut idle()).unwrap();
            assert!(out.probabilities.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn embedding_lookup_returns_table_rows() {
        let t = small_tab(0, vec![4]);
        let params = init_params(&DeepModel::TabTransformer(t.clone()), 1).unwrap();
        let table = params.get("embedding0").unwrap();
        let mut tape = Tape::new();
        let v = tape.constant(table.clone());
        let e = tape.gather_rows(v, &[2, 0]).unwrap();
        assert_eq!(&tape.value(e).data()[..3], &table.data()[6..9]);
        assert_eq!(&tape.value(e).data()[3..], &table.data()[..3]);
    }

    #[test]
    fn out_of_range_category_names_feature() {
        let t = small_tab(1, vec![2, 3]);
        let params = init_params(&DeepModel::TabTransformer(t.clone()), 1).unwrap();
        let x_cat = ndarray::array![[0, 1], [1, 3]];
        let err = tabtransformer_forward(&t, &params, &Array2::zeros((2, 1)), &x_cat, false, &mut idle()).unwrap_err();
        assert_eq!(
            err,
            AttentionError::CategoryOutOfRange {
                feature: 1,
                index: 3,
                cardinality: 3
            }
        );
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let c = small_transformer(4);
        let params = init_params(&DeepModel::Transformer(c.clone()), 1).unwrap();
        let err = transformer_forward(&c, &params, &Array2::zeros((2, 3)), false, &mut idle()).unwrap_err();
        assert_eq!(err, AttentionError::Width { expected: 4, found: 3 });
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let mut rng = idle();
        let c = small_transformer(5);
        let params = init_params(&DeepModel::Transformer(c.clone()), 9).unwrap();
        let out = transformer_forward(&c, &params, &random_matrix(7, 5, &mut rng), false, &mut idle()).unwrap();
        assert_eq!(out.attention_weights.len(), 2);
        for w in &out.attention_weights {
            assert_eq!(w.shape(), &[7, 2, 1, 1]);
            for row in w.data().chunks(w.last_dim()) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    fn model_gradient_error(model: &DeepModel, input: &ModelInput, y: &[f64], seed: u64) -> f64 {
        let params = init_params(model, seed).unwrap();
        let names = params.names.clone();
        let reg = regularized(model, &names);
        let (_, _, l2, _, _) = model.training();
        let f = |tape: &mut Tape, vars: &[Var]| {
            let g = build(tape, model, &names, vars, input, false, &mut idle()).unwrap();
            let weights: Vec<Var> = reg.iter().map(|&i| vars[i]).collect();
            tape.bce_loss(g.probabilities, y, l2, &weights).unwrap()
        };
        max_gradient_error(&params.tensors, &f, 1e-5)
    }

    #[test]
    fn transformer_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let c = small_transformer(3);
        let input = ModelInput::numerical_only(random_matrix(4, 3, &mut rng));
        let err = model_gradient_error(&DeepModel::Transformer(c), &input, &[1.0, 0.0, 1.0, 0.0], 4);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn tabtransformer_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = small_tab(3, vec![3, 2]);
        let input = ModelInput {
            numerical: random_matrix(4, 3, &mut rng),
            categorical: ndarray::array![[0, 1], [2, 0], [1, 1], [2, 1]],
        };
        let err = model_gradient_error(&DeepModel::TabTransformer(c), &input, &[0.0, 1.0, 1.0, 0.0], 5);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn early_stopping_sequence() {
        let mut s = EarlyStopping::new(2, EARLY_STOP_MIN_DELTA);
        assert_eq!(s.observe(0.5), StopDecision::Improved);
        assert_eq!(s.observe(0.6), StopDecision::Continue);
        assert_eq!(s.observe(0.7), StopDecision::Stop);
        assert_eq!(s.best_epoch, Some(0));

        let mut s = EarlyStopping::new(2, EARLY_STOP_MIN_DELTA);
        for (loss, d) in [
            (1.0, StopDecision::Improved),
            (0.9999995, StopDecision::Continue),
            (0.5, StopDecision::Improved),
        ] {
            assert_eq!(s.observe(loss), d);
        }
    }

    fn planted(n_rows: usize, seed: u64) -> Dataset {
        generate_synthetic(&SynthSpec {
            n_rows,
            n_numerical: 6,
            n_categorical: 2,
            n_informative: 3,
            informative_indices: Vec::new(),
            noise_level: 0.0,
            seed,
        })
        .unwrap()
        .0
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let ds = planted(80, 1);
        let input = ModelInput::dense(&ds);
        let c = TransformerConfig {
            learning_rate: 0.0,
            batch_size: 16,
            epochs: 5,
            ..small_transformer(8)
        };
        let model = DeepModel::Transformer(c);
        let params = init_params(&model, 2).unwrap();
        let split = Split { input: &input, y: ds.y() };
        let (trained, curves) = train(params.clone(), &model, split, split, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(trained.params, params);
        // flat validation loss: improves once, then patience 2 stops at epoch 3
        assert_eq!(curves.epochs(), 3);
        assert!(curves.val_loss.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn training_learns_and_returns_best_epoch() {
        let ds = planted(300, 4);
        let (input, cards) = ModelInput::tabular(&ds);
        let rows: Vec<usize> = (0..300).collect();
        let (tr, va) = rows.split_at(240);
        let (tr_in, va_in) = (input.select(tr), input.select(va));
        let tr_y: Vec<u8> = tr.iter().map(|&i| ds.y()[i]).collect();
        let va_y: Vec<u8> = va.iter().map(|&i| ds.y()[i]).collect();
        let c = TabTransformerConfig {
            learning_rate: 1e-2,
            batch_size: 32,
            epochs: 15,
            ..small_tab(6, cards)
        };
        let model = DeepModel::TabTransformer(c);
        let params = init_params(&model, 1).unwrap();
        let val = Split { input: &va_in, y: &va_y };
        let (trained, curves) = train(params, &model, Split { input: &tr_in, y: &tr_y }, val, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(curves.train_loss.first() > curves.train_loss.last());
        let min = curves.val_loss.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(curves.val_loss[trained.best_epoch], min);
        assert_eq!(validation_loss(&trained, val).unwrap(), min);
    }

    #[test]
    fn curves_csv_layout() {
        let curves = TrainingCurves {
            train_loss: vec![0.7],
            val_loss: vec![0.6],
            train_accuracy: vec![0.5],
            val_accuracy: vec![0.75],
        };
        let mut buf = Vec::new();
        curves.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,train_loss,val_loss,train_acc,val_acc\n1,0.7,0.6,0.5,0.75\n"
        );
    }

    #[test]
    fn config_validation() {
        assert!(TransformerConfig::default().validate().is_ok());
        assert!(TabTransformerConfig::default().validate().is_ok());
        let bad = TransformerConfig {
            model_dim: 10,
            num_heads: 4,
            ..TransformerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TransformerConfig {
            dropout_rate: 1.0,
            ..TransformerConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(init_params(&DeepModel::Transformer(TransformerConfig::default()), 0).is_err());
    }
}
