//! The `.stab` model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"STAB" | u32 format_version | u64 manifest_len | manifest JSON
//!         | u64 n_values | n_values × f64 | 32-byte SHA-256 of everything before it
//! ```
//!
//! The manifest lists every blob as `{name, shape}` in storage order; the
//! values of all blobs are concatenated in the f64 section.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::attention::{DeepModel, ModelParams, TrainedModel};
use crate::autodiff::Tensor;
use crate::classic::{DecisionTreeModel, LogRegModel, RandomForestModel, TREE_RECORD_WIDTH};
use crate::dataset::ColumnMeta;
use crate::evaluation::FoldDetails;
use crate::pca::PcaModel;

use super::pipeline::{ClassifierState, FittedExperiment, FrontEndState, MinMaxScaler};

pub const MAGIC: &[u8; 4] = b"STAB";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a model artifact (bad magic)")]
    BadMagic,
    #[error("artifact format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("artifact is truncated or has trailing bytes: {0}")]
    Length(String),
    #[error("checksum mismatch")]
    Checksum,
    #[error("manifest: {0}")]
    Manifest(String),
}

pub type Result<T, E = ArtifactError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl BlobSpec {
    fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum FrontEndManifest {
    None,
    Mask { columns: Vec<usize> },
    Pca { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ClassifierManifest {
    Logreg { trained_feature_indices: Vec<usize> },
    Dt { max_depth: usize, n_features: usize },
    Rf {
        n_estimators: usize,
        tree_max_depths: Vec<usize>,
        bootstrap_seeds: Vec<u64>,
        feature_subsample: usize,
        n_features: usize,
    },
    Deep { model: DeepModel, best_epoch: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    kind: String,
    method: String,
    feature_names: Vec<String>,
    columns: Vec<ColumnMeta>,
    front_end: FrontEndManifest,
    classifier: ClassifierManifest,
    selected_features: Option<Vec<String>>,
    pca_components: Option<usize>,
    config: Option<serde_json::Value>,
    blobs: Vec<BlobSpec>,
}

/// A fitted pipeline plus the context it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub method: String,
    /// Resolved experiment configuration, when the model came from a run.
    pub config: Option<serde_json::Value>,
    pub model: FittedExperiment,
}

impl ModelArtifact {
    pub fn new(method: impl Into<String>, config: Option<serde_json::Value>, model: FittedExperiment) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            method: method.into(),
            config,
            model,
        }
    }

    /// Short tag of the classifier: `logreg`, `dt`, `rf`, `transformer` or
    /// `tabtransformer`.
    pub fn kind(&self) -> &'static str {
        match &self.model.classifier {
            ClassifierState::LogReg(_) => "logreg",
            ClassifierState::Tree(_) => "dt",
            ClassifierState::Forest(_) => "rf",
            ClassifierState::Deep(m) => match m.model {
                DeepModel::Transformer(_) => "transformer",
                DeepModel::TabTransformer(_) => "tabtransformer",
            },
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut blobs = Blobs::default();
        let m = &self.model;
        blobs.push("scaler.min", vec![m.scaler.min.len()], &m.scaler.min);
        blobs.push("scaler.range", vec![m.scaler.range.len()], &m.scaler.range);
        let front_end = match &m.front_end {
            FrontEndState::None => FrontEndManifest::None,
            FrontEndState::Mask(cols) => FrontEndManifest::Mask { columns: cols.clone() },
            FrontEndState::Pca(p) => {
                let (k, width) = p.components.dim();
                blobs.push("pca.mean", vec![width], p.mean.as_slice().expect("contiguous"));
                blobs.push("pca.components", vec![k, width], &p.components.iter().copied().collect::<Vec<_>>());
                blobs.push("pca.explained_variance", vec![k], &p.explained_variance);
                blobs.push("pca.explained_ratio", vec![k], &p.explained_ratio);
                FrontEndManifest::Pca { k }
            }
        };
        let classifier = match &m.classifier {
            ClassifierState::LogReg(lr) => {
                blobs.push("logreg.weights", vec![lr.weights.len()], &lr.weights);
                blobs.push("logreg.bias", vec![1], &[lr.bias]);
                ClassifierManifest::Logreg {
                    trained_feature_indices: lr.trained_feature_indices.clone(),
                }
            }
            ClassifierState::Tree(t) => {
                blobs.push_tree("tree", t);
                ClassifierManifest::Dt {
                    max_depth: t.max_depth,
                    n_features: t.n_features,
                }
            }
            ClassifierState::Forest(f) => {
                for (i, t) in f.trees.iter().enumerate() {
                    blobs.push_tree(&format!("forest.tree{i}"), t);
                }
                ClassifierManifest::Rf {
                    n_estimators: f.n_estimators,
                    tree_max_depths: f.trees.iter().map(|t| t.max_depth).collect(),
                    bootstrap_seeds: f.bootstrap_seeds.clone(),
                    feature_subsample: f.feature_subsample,
                    n_features: f.n_features,
                }
            }
            ClassifierState::Deep(d) => {
                for (name, t) in d.params.names.iter().zip(&d.params.tensors) {
                    blobs.push(&format!("param.{name}"), t.shape().to_vec(), t.data());
                }
                ClassifierManifest::Deep {
                    model: d.model.clone(),
                    best_epoch: d.best_epoch,
                }
            }
        };
        let manifest = Manifest {
            kind: self.kind().to_string(),
            method: self.method.clone(),
            feature_names: m.feature_names.clone(),
            columns: m.meta.clone(),
            front_end,
            classifier,
            selected_features: m.details.selected_features.clone(),
            pca_components: m.details.pca_components,
            config: self.config.clone(),
            blobs: blobs.specs,
        };
        let json = serde_json::to_vec(&manifest).map_err(|e| ArtifactError::Manifest(e.to_string()))?;

        let mut out = Vec::with_capacity(32 + json.len() + 8 * blobs.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&(blobs.values.len() as u64).to_le_bytes());
        for v in &blobs.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(ArtifactError::BadMagic);
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(ArtifactError::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let manifest_len = r.u64()?;
        let json = r.take(manifest_len)?;
        let n_values = r.u64()?;
        let raw = r.take(n_values.checked_mul(8).ok_or_else(|| ArtifactError::Length("value count overflows".into()))?)?;
        let body_end = r.pos;
        let digest = r.take(DIGEST_LEN as u64)?;
        if r.pos != bytes.len() {
            return Err(ArtifactError::Length(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        if Sha256::digest(&bytes[..body_end]).as_slice() != digest {
            return Err(ArtifactError::Checksum);
        }

        let manifest: Manifest = serde_json::from_slice(json).map_err(|e| ArtifactError::Manifest(e.to_string()))?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let declared: usize = manifest.blobs.iter().map(BlobSpec::len).sum();
        if declared != values.len() {
            return Err(ArtifactError::Length(format!(
                "manifest declares {declared} values, blob holds {}",
                values.len()
            )));
        }
        let mut store = BlobReader {
            specs: &manifest.blobs,
            values: &values,
            next: 0,
            offset: 0,
        };
        let model = decode_model(&manifest, &mut store)?;
        if store.next != manifest.blobs.len() {
            return Err(ArtifactError::Manifest(format!(
                "{} blobs left unread",
                manifest.blobs.len() - store.next
            )));
        }
        Ok(Self {
            format_version: version,
            method: manifest.method,
            config: manifest.config,
            model,
        })
    }

    /// Written to a sibling temp file, then renamed into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        super::write_atomic(path, &bytes).map_err(|source| ArtifactError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| ArtifactError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// Human-readable summary of the manifest.
    pub fn describe(&self) -> serde_json::Value {
        let m = &self.model;
        let front_end = match &m.front_end {
            FrontEndState::None => serde_json::json!({"kind": "none"}),
            FrontEndState::Mask(c) => serde_json::json!({"kind": "mask", "columns": c.len()}),
            FrontEndState::Pca(p) => serde_json::json!({"kind": "pca", "k": p.k}),
        };
        let n_parameters = match &m.classifier {
            ClassifierState::LogReg(l) => l.weights.len() + 1,
            ClassifierState::Tree(t) => t.root.n_nodes(),
            ClassifierState::Forest(f) => f.trees.iter().map(|t| t.root.n_nodes()).sum(),
            ClassifierState::Deep(d) => d.params.n_values(),
        };
        serde_json::json!({
            "format_version": self.format_version,
            "kind": self.kind(),
            "method": self.method,
            "n_input_features": m.feature_names.len(),
            "front_end": front_end,
            "selected_features": m.details.selected_features,
            "pca_components": m.details.pca_components,
            "size": n_parameters,
        })
    }
}

pub fn save_model(artifact: &ModelArtifact, path: impl AsRef<Path>) -> Result<()> {
    artifact.save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelArtifact> {
    ModelArtifact::load(path)
}

#[derive(Default)]
struct Blobs {
    specs: Vec<BlobSpec>,
    values: Vec<f64>,
}

impl Blobs {
    fn push(&mut self, name: &str, shape: Vec<usize>, values: &[f64]) {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.specs.push(BlobSpec {
            name: name.to_string(),
            shape,
        });
        self.values.extend_from_slice(values);
    }

    fn push_tree(&mut self, name: &str, tree: &DecisionTreeModel) {
        let records = tree.to_preorder();
        self.push(name, vec![records.len() / TREE_RECORD_WIDTH, TREE_RECORD_WIDTH], &records);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: u64) -> Result<&'a [u8]> {
        let n = usize::try_from(n).map_err(|_| ArtifactError::Length("section too large".into()))?;
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ArtifactError::Length(format!("needed {n} bytes at offset {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

struct BlobReader<'a> {
    specs: &'a [BlobSpec],
    values: &'a [f64],
    next: usize,
    offset: usize,
}

impl BlobReader<'_> {
    /// Next blob, which must carry `name`.
    fn take(&mut self, name: &str) -> Result<(&[usize], &[f64])> {
        let spec = self
            .specs
            .get(self.next)
            .ok_or_else(|| ArtifactError::Manifest(format!("missing blob `{name}`")))?;
        if spec.name != name {
            return Err(ArtifactError::Manifest(format!("expected blob `{name}`, found `{}`", spec.name)));
        }
        let len = spec.len();
        let values = &self.values[self.offset..self.offset + len];
        self.next += 1;
        self.offset += len;
        Ok((&spec.shape, values))
    }

    fn vector(&mut self, name: &str, len: usize) -> Result<Vec<f64>> {
        let (shape, v) = self.take(name)?;
        if shape != [len] {
            return Err(ArtifactError::Manifest(format!("blob `{name}` has shape {shape:?}, expected [{len}]")));
        }
        Ok(v.to_vec())
    }

    fn tree(&mut self, name: &str, max_depth: usize, n_features: usize) -> Result<DecisionTreeModel> {
        let (shape, v) = self.take(name)?;
        if shape.len() != 2 || shape[1] != TREE_RECORD_WIDTH {
            return Err(ArtifactError::Manifest(format!("blob `{name}` has shape {shape:?}")));
        }
        DecisionTreeModel::from_preorder(v, max_depth, n_features).map_err(|e| ArtifactError::Manifest(e.to_string()))
    }
}

fn decode_model(manifest: &Manifest, blobs: &mut BlobReader<'_>) -> Result<FittedExperiment> {
    let bad = |m: String| ArtifactError::Manifest(m);
    let p = manifest.columns.len();
    if manifest.feature_names.len() != p {
        return Err(bad(format!("{} names for {p} columns", manifest.feature_names.len())));
    }
    let scaler = MinMaxScaler {
        min: blobs.vector("scaler.min", p)?,
        range: blobs.vector("scaler.range", p)?,
        categorical: manifest.columns.iter().map(ColumnMeta::is_categorical).collect(),
    };
    let front_end = match &manifest.front_end {
        FrontEndManifest::None => FrontEndState::None,
        FrontEndManifest::Mask { columns } => {
            if columns.iter().any(|&j| j >= p) {
                return Err(bad("mask column out of range".into()));
            }
            FrontEndState::Mask(columns.clone())
        }
        FrontEndManifest::Pca { k } => {
            let mean = blobs.vector("pca.mean", p)?;
            let (shape, comp) = blobs.take("pca.components")?;
            if shape != [*k, p] {
                return Err(bad(format!("pca.components has shape {shape:?}")));
            }
            let components = Array2::from_shape_vec((*k, p), comp.to_vec()).expect("shape checked");
            FrontEndState::Pca(PcaModel {
                mean: Array1::from(mean),
                components,
                explained_variance: blobs.vector("pca.explained_variance", *k)?,
                explained_ratio: blobs.vector("pca.explained_ratio", *k)?,
                k: *k,
            })
        }
    };
    let classifier = match &manifest.classifier {
        ClassifierManifest::Logreg {
            trained_feature_indices,
        } => ClassifierState::LogReg(LogRegModel {
            weights: blobs.vector("logreg.weights", trained_feature_indices.len())?,
            bias: blobs.vector("logreg.bias", 1)?[0],
            trained_feature_indices: trained_feature_indices.clone(),
        }),
        ClassifierManifest::Dt { max_depth, n_features } => {
            ClassifierState::Tree(blobs.tree("tree", *max_depth, *n_features)?)
        }
        ClassifierManifest::Rf {
            n_estimators,
            tree_max_depths,
            bootstrap_seeds,
            feature_subsample,
            n_features,
        } => {
            if tree_max_depths.len() != *n_estimators {
                return Err(bad(format!("{} tree depths for {n_estimators} trees", tree_max_depths.len())));
            }
            let trees = tree_max_depths
                .iter()
                .enumerate()
                .map(|(i, &d)| blobs.tree(&format!("forest.tree{i}"), d, *n_features))
                .collect::<Result<Vec<_>>>()?;
            ClassifierState::Forest(RandomForestModel {
                trees,
                n_estimators: *n_estimators,
                bootstrap_seeds: bootstrap_seeds.clone(),
                feature_subsample: *feature_subsample,
                n_features: *n_features,
            })
        }
        ClassifierManifest::Deep { model, best_epoch } => {
            let expected = crate::attention::init_params(model, 0).map_err(|e| bad(e.to_string()))?;
            let mut tensors = Vec::with_capacity(expected.len());
            for (name, t) in expected.names.iter().zip(&expected.tensors) {
                let (shape, v) = blobs.take(&format!("param.{name}"))?;
                if shape != t.shape() {
                    return Err(bad(format!("param.{name} has shape {shape:?}, expected {:?}", t.shape())));
                }
                tensors.push(Tensor::new(shape.to_vec(), v.to_vec()).map_err(|e| bad(e.to_string()))?);
            }
            ClassifierState::Deep(TrainedModel {
                model: model.clone(),
                params: ModelParams {
                    names: expected.names,
                    tensors,
                },
                best_epoch: *best_epoch,
            })
        }
    };
    Ok(FittedExperiment {
        feature_names: manifest.feature_names.clone(),
        meta: manifest.columns.clone(),
        scaler,
        front_end,
        classifier,
        details: FoldDetails {
            selected_features: manifest.selected_features.clone(),
            pca_components: manifest.pca_components,
            curves: None,
        },
    })
}
