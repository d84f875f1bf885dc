//! Experiment configuration, orchestration and output.
//!
//! A run loads a dataset, cross-validates one front end + classifier pipeline,
//! refits it on every cross-validation row and writes:
//!
//! - `report.json`: resolved config, per-fold and aggregate metrics, timings
//! - `table5.csv`: one `method,accuracy,precision,recall,f1,auc` row
//! - `curves_fold<i>.csv`: per-epoch curves of deep classifiers
//! - `model.stab`: the refit model (see [`artifact`])
//! - `audit.json`: preprocessing bookkeeping or the planted synthetic features

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::attention::{TabTransformerConfig, TransformerConfig};
use crate::classic::{ForestConfig, TreeConfig};
use crate::dataset::presets::hfea_options;
use crate::dataset::{generate_synthetic, load_csv, preprocess, Dataset, PreprocessOptions, SynthSpec};
use crate::evaluation::{
    cross_validate, kfold_split, stratified_holdout, write_table5, Aggregate, FoldContext, FoldResult, MetricSummary,
    Table5Row,
};
use crate::pso::{pso_run, write_history_csv, HistoryEntry, PsoConfig};

pub mod artifact;
pub mod pipeline;

pub use artifact::{load_model, save_model, ArtifactError, ModelArtifact};
pub use pipeline::{ClassifierState, ExperimentPipeline, FittedExperiment, FrontEndState, MinMaxScaler};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {total} experiments failed")]
    PartialFailure { failed: usize, total: usize },
}

impl ExperimentError {
    /// 2 for configuration problems, 3 for data problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            _ => 1,
        }
    }

    fn stage(stage: &'static str, e: impl fmt::Display) -> Self {
        Self::Stage {
            stage,
            message: e.to_string(),
        }
    }
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Hfea,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    /// Named inclusion/exclusion rules; ignored when `options` is given.
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub options: Option<PreprocessOptions>,
}

impl CsvSource {
    pub fn resolved_options(&self) -> Result<PreprocessOptions> {
        match (&self.options, self.preset) {
            (Some(o), _) => Ok(o.clone()),
            (None, Some(Preset::Hfea)) => Ok(hfea_options()),
            (None, None) => Err(ExperimentError::Config(
                "data.csv needs either `preset` or `options`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv(CsvSource),
    Synthetic(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcaConfig {
    /// Minimum cumulative explained-variance ratio.
    pub retain: f64,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self { retain: 0.95 }
    }
}

/// Written either as a bare name (`"pso"`) taking every default, or as a
/// single-key object (`{"pso": {"swarm_size": 30}}`).
#[derive(Debug, Clone, PartialEq)]
pub enum FrontEnd {
    None,
    Pca(PcaConfig),
    Pso(PsoConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Rf(ForestConfig),
    Dt(TreeConfig),
    Transformer(TransformerConfig),
    TabTransformer(TabTransformerConfig),
}

/// Deserialization of the name-or-object enums.
trait Named: Sized {
    const WHAT: &'static str;
    const NAMES: &'static [&'static str];

    /// The variant with every default, or `None` for an unknown name.
    fn by_name(name: &str) -> Option<Self>;

    /// The variant `name` with its configuration read from `map`.
    fn with_value<'de, A: MapAccess<'de>>(name: &str, map: &mut A) -> Result<Self, A::Error>;
}

impl Named for FrontEnd {
    const WHAT: &'static str = "front end";
    const NAMES: &'static [&'static str] = &["none", "pca", "pso"];

    fn by_name(name: &str) -> Option<Self> {
        Some(match name {
            "none" => Self::None,
            "pca" => Self::Pca(PcaConfig::default()),
            "pso" => Self::Pso(PsoConfig::default()),
            _ => return None,
        })
    }

    fn with_value<'de, A: MapAccess<'de>>(name: &str, map: &mut A) -> Result<Self, A::Error> {
        Ok(match name {
            "none" => {
                map.next_value::<EmptyObject>()?;
                Self::None
            }
            "pca" => Self::Pca(map.next_value()?),
            "pso" => Self::Pso(map.next_value()?),
            other => return Err(de::Error::unknown_variant(other, Self::NAMES)),
        })
    }
}

impl Named for Classifier {
    const WHAT: &'static str = "classifier";
    const NAMES: &'static [&'static str] = &["rf", "dt", "transformer", "tabtransformer"];

    fn by_name(name: &str) -> Option<Self> {
        Some(match name {
            "rf" => Self::Rf(ForestConfig::default()),
            "dt" => Self::Dt(TreeConfig::default()),
            "transformer" => Self::Transformer(TransformerConfig::default()),
            "tabtransformer" => Self::TabTransformer(TabTransformerConfig::default()),
            _ => return None,
        })
    }

    fn with_value<'de, A: MapAccess<'de>>(name: &str, map: &mut A) -> Result<Self, A::Error> {
        Ok(match name {
            "rf" => Self::Rf(map.next_value()?),
            "dt" => Self::Dt(map.next_value()?),
            "transformer" => Self::Transformer(map.next_value()?),
            "tabtransformer" => Self::TabTransformer(map.next_value()?),
            other => return Err(de::Error::unknown_variant(other, Self::NAMES)),
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmptyObject {}

struct NamedVisitor<T>(std::marker::PhantomData<T>);

impl<'de, T: Named> Visitor<'de> for NamedVisitor<T> {
    type Value = T;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a {} name or a single-key object", T::WHAT)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<T, E> {
        T::by_name(v).ok_or_else(|| E::unknown_variant(v, T::NAMES))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<T, A::Error> {
        let name: String = map
            .next_key()?
            .ok_or_else(|| de::Error::invalid_length(0, &"exactly one key"))?;
        let value = T::with_value(&name, &mut map)?;
        if map.next_key::<String>()?.is_some() {
            return Err(de::Error::invalid_length(2, &"exactly one key"));
        }
        Ok(value)
    }
}

impl<'de> Deserialize<'de> for FrontEnd {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(NamedVisitor(std::marker::PhantomData))
    }
}

impl<'de> Deserialize<'de> for Classifier {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(NamedVisitor(std::marker::PhantomData))
    }
}

impl FrontEnd {
    fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Pca(_) => "pca",
            Self::Pso(_) => "pso",
        }
    }
}

impl Classifier {
    fn name(&self) -> &'static str {
        match self {
            Self::Rf(_) => "rf",
            Self::Dt(_) => "dt",
            Self::Transformer(_) => "transformer",
            Self::TabTransformer(_) => "tabtransformer",
        }
    }
}

/// Always the resolved single-key object form.
impl Serialize for FrontEnd {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(1))?;
        match self {
            Self::None => m.serialize_entry("none", &serde_json::Map::new())?,
            Self::Pca(c) => m.serialize_entry("pca", c)?,
            Self::Pso(c) => m.serialize_entry("pso", c)?,
        }
        m.end()
    }
}

impl Serialize for Classifier {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(1))?;
        match self {
            Self::Rf(c) => m.serialize_entry("rf", c)?,
            Self::Dt(c) => m.serialize_entry("dt", c)?,
            Self::Transformer(c) => m.serialize_entry("transformer", c)?,
            Self::TabTransformer(c) => m.serialize_entry("tabtransformer", c)?,
        }
        m.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub k: usize,
    pub seed: u64,
    /// Select features once on a dedicated split instead of inside every fold.
    pub fast_pso_mode: bool,
    pub stratified: bool,
    /// Share of rows reserved for selection in fast mode.
    pub selection_fraction: f64,
    /// Share of each training fold held out for early stopping of deep models.
    pub validation_fraction: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            k: 10,
            seed: 0,
            fast_pso_mode: false,
            stratified: true,
            selection_fraction: 0.2,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub data: DataSource,
    pub front_end: FrontEnd,
    pub classifier: Classifier,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("swarmtab-out")
}

impl ExperimentConfig {
    /// Table-style label such as `PSO + Random Forest`.
    pub fn method_name(&self) -> String {
        let front = match self.front_end {
            FrontEnd::None => "None",
            FrontEnd::Pca(_) => "PCA",
            FrontEnd::Pso(_) => "PSO",
        };
        let clf = match self.classifier {
            Classifier::Rf(_) => "Random Forest",
            Classifier::Dt(_) => "Decision Tree",
            Classifier::Transformer(_) => "Transformer",
            Classifier::TabTransformer(_) => "TabTransformer",
        };
        format!("{front} + {clf}")
    }

    /// File-system friendly `<front>_<classifier>`.
    pub fn slug(&self) -> String {
        format!("{}_{}", self.front_end.name(), self.classifier.name())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        let e = &self.evaluation;
        if e.k < 2 {
            return bad(format!("evaluation.k must be at least 2, got {}", e.k));
        }
        for (name, v) in [
            ("selection_fraction", e.selection_fraction),
            ("validation_fraction", e.validation_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("evaluation.{name} must lie in (0, 1), got {v}"));
            }
        }
        match &self.data {
            DataSource::Synthetic(s) => s.validate().map_err(|e| ExperimentError::Config(format!("data.synthetic: {e}")))?,
            DataSource::Csv(c) => {
                c.resolved_options()?;
            }
        }
        match &self.front_end {
            FrontEnd::None => {}
            FrontEnd::Pca(p) => {
                if !(p.retain > 0.0 && p.retain <= 1.0) {
                    return bad(format!("front_end.pca.retain must lie in (0, 1], got {}", p.retain));
                }
            }
            FrontEnd::Pso(p) => p.validate().map_err(|e| ExperimentError::Config(format!("front_end.pso: {e}")))?,
        }
        let clf = match &self.classifier {
            Classifier::Rf(c) => {
                if c.n_estimators == 0 || c.max_depth == 0 {
                    return bad("classifier.rf: n_estimators and max_depth must be positive".into());
                }
                Ok(())
            }
            Classifier::Dt(c) => {
                if c.max_depth == 0 {
                    return bad("classifier.dt: max_depth must be positive".into());
                }
                Ok(())
            }
            Classifier::Transformer(c) => {
                let mut c = c.clone();
                c.input_dim = c.input_dim.max(1);
                c.validate()
            }
            Classifier::TabTransformer(c) => c.validate(),
        };
        clf.map_err(|e| ExperimentError::Config(format!("classifier.{}: {e}", self.classifier.name())))
    }
}

/// Parses and validates a JSON config; errors carry the offending key path.
pub fn parse_config_str(json: &str) -> Result<ExperimentConfig> {
    let d = &mut serde_json::Deserializer::from_str(json);
    let config: ExperimentConfig = serde_path_to_error::deserialize(d).map_err(|e| {
        let path = e.path().to_string();
        ExperimentError::Config(if path == "." {
            e.inner().to_string()
        } else {
            format!("at `{path}`: {}", e.inner())
        })
    })?;
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_rows: usize,
    pub n_features: usize,
    pub n_positive: usize,
    pub feature_names: Vec<String>,
}

/// Feature selection done once before cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub selection_rows: usize,
    pub selected_features: Vec<String>,
    pub best_cost: f64,
    pub best_f1: f64,
    pub evaluations: usize,
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_secs: f64,
    pub selection_secs: f64,
    pub cross_validation_secs: f64,
    pub refit_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub selection: Option<SelectionSummary>,
    pub folds: Vec<FoldResult>,
    pub aggregate: Aggregate,
    /// Feature names the refit model uses, when a PSO front end ran.
    pub selected_features: Option<Vec<String>>,
    /// Components the refit model keeps, when a PCA front end ran.
    pub pca_components: Option<usize>,
    pub timings: Timings,
}

impl ExperimentReport {
    pub fn table5_row(&self) -> Table5Row {
        Table5Row::new(&self.method, &self.aggregate.mean)
    }

    /// The report as JSON with the `timings` field removed.
    pub fn deterministic_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().expect("object").remove("timings");
        v
    }
}

/// Writes `bytes` to a temp file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| ExperimentError::stage("output", e))?;
    Ok(buf)
}

/// Loads the configured dataset plus an audit record for `audit.json`.
pub fn load_dataset(source: &DataSource) -> Result<(Dataset, serde_json::Value)> {
    match source {
        DataSource::Synthetic(spec) => {
            let (ds, planted) = generate_synthetic(spec).map_err(|e| ExperimentError::Data(e.to_string()))?;
            let names = ds.feature_names();
            let audit = serde_json::json!({
                "source": "synthetic",
                "rows": ds.n_rows(),
                "planted_indices": planted,
                "planted_features": planted.iter().map(|&j| names[j].clone()).collect::<Vec<_>>(),
            });
            Ok((ds, audit))
        }
        DataSource::Csv(c) => {
            let options = c.resolved_options()?;
            let table = load_csv(&c.path).map_err(|e| ExperimentError::Data(e.to_string()))?;
            let (ds, audit) = preprocess(table, &options).map_err(|e| ExperimentError::Data(e.to_string()))?;
            let audit = serde_json::json!({
                "source": "csv",
                "path": c.path,
                "rows_in": audit.rows_in,
                "rows_out": audit.rows_out,
                "columns_dropped": audit.columns_dropped,
            });
            Ok((ds, audit))
        }
    }
}

/// Everything a run produces, before it is written out.
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub model: ModelArtifact,
    pub audit: serde_json::Value,
}

/// Runs the experiment in memory.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let start = Instant::now();
    let mut timings = Timings::default();
    let (dataset, audit) = load_dataset(&config.data)?;
    if !dataset.has_both_classes() {
        return Err(ExperimentError::Data("the target has a single class".into()));
    }
    timings.load_secs = start.elapsed().as_secs_f64();
    let eval = &config.evaluation;
    let names = dataset.feature_names();

    let mut pipeline = ExperimentPipeline {
        front_end: config.front_end.clone(),
        classifier: config.classifier.clone(),
        validation_fraction: eval.validation_fraction,
        fixed_mask: None,
    };
    let mut selection = None;
    let mut cv_data = dataset.clone();
    if let (FrontEnd::Pso(pso), true) = (&config.front_end, eval.fast_pso_mode) {
        let t = Instant::now();
        let (rest, held) = stratified_holdout(dataset.y(), eval.selection_fraction, eval.seed)
            .map_err(|e| ExperimentError::stage("selection split", e))?;
        let picked = dataset.select_rows(&held);
        let scaler = MinMaxScaler::fit(&picked);
        let scaled = scaler.apply(picked.x()).mapv(|v| v.clamp(0.0, 1.0));
        let picked = picked.with_features(scaled).map_err(|e| ExperimentError::stage("selection", e))?;
        let mut pso = pso.clone();
        pso.seed = pso.seed.wrapping_add(eval.seed);
        let result = pso_run(&picked, &pso).map_err(|e| ExperimentError::stage("pso", e))?;
        let mask = result.mask.indices();
        if mask.is_empty() {
            return Err(ExperimentError::stage("pso", "no features selected"));
        }
        selection = Some(SelectionSummary {
            selection_rows: held.len(),
            selected_features: mask.iter().map(|&j| names[j].clone()).collect(),
            best_cost: result.best.cost,
            best_f1: result.best.f1,
            evaluations: result.evaluations,
            history: result.history,
        });
        pipeline.fixed_mask = Some(mask);
        cv_data = dataset.select_rows(&rest);
        timings.selection_secs = t.elapsed().as_secs_f64();
    }

    let t = Instant::now();
    let plan = kfold_split(
        cv_data.n_rows(),
        eval.k,
        eval.seed,
        eval.stratified.then_some(cv_data.y()),
    )
    .map_err(|e| ExperimentError::stage("fold plan", e))?;
    let cv = cross_validate(&pipeline, &cv_data, &plan).map_err(|e| ExperimentError::stage("cross-validation", e))?;
    timings.cross_validation_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let ctx = FoldContext {
        fold: eval.k,
        seed: eval.seed.wrapping_add(eval.k as u64),
    };
    let fitted = pipeline
        .fit_experiment(&cv_data, ctx)
        .map_err(|e| ExperimentError::stage("refit", e))?;
    timings.refit_secs = t.elapsed().as_secs_f64();
    timings.total_secs = start.elapsed().as_secs_f64();

    let method = config.method_name();
    let report = ExperimentReport {
        method: method.clone(),
        seed: eval.seed,
        config: config.clone(),
        dataset: DatasetSummary {
            n_rows: dataset.n_rows(),
            n_features: dataset.n_features(),
            n_positive: dataset.positive_count(),
            feature_names: names,
        },
        selection,
        folds: cv.folds,
        aggregate: cv.aggregate,
        selected_features: fitted.details.selected_features.clone(),
        pca_components: fitted.details.pca_components,
        timings,
    };
    let config_json = serde_json::to_value(config).map_err(|e| ExperimentError::stage("output", e))?;
    Ok(ExperimentOutcome {
        report,
        model: ModelArtifact::new(method, Some(config_json), fitted),
        audit,
    })
}

/// Writes every output file of `outcome` into `dir`.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let json = |v: &dyn erased::Json| v.pretty();
    write_file(&dir.join("report.json"), &json(&outcome.report)?)?;
    write_file(&dir.join("audit.json"), &json(&outcome.audit)?)?;
    let row = outcome.report.table5_row();
    write_file(&dir.join("table5.csv"), &csv_bytes(|b| write_table5(b, &[row]))?)?;
    for fold in &outcome.report.folds {
        if let Some(curves) = &fold.details.curves {
            let bytes = csv_bytes(|b| curves.write_csv(b))?;
            write_file(&dir.join(format!("curves_fold{}.csv", fold.fold)), &bytes)?;
        }
    }
    if let Some(sel) = &outcome.report.selection {
        write_file(&dir.join("pso_history.csv"), &csv_bytes(|b| write_history_csv(b, &sel.history))?)?;
    }
    let path = dir.join("model.stab");
    outcome.model.save(&path).map_err(|e| ExperimentError::stage("model artifact", e))
}

mod erased {
    use super::{ExperimentError, Result};

    pub trait Json {
        fn pretty(&self) -> Result<Vec<u8>>;
    }

    impl<T: serde::Serialize> Json for T {
        fn pretty(&self) -> Result<Vec<u8>> {
            let mut v = serde_json::to_vec_pretty(self).map_err(|e| ExperimentError::stage("output", e))?;
            v.push(b'\n');
            Ok(v)
        }
    }
}

/// Runs one experiment and writes its outputs to `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let outcome = execute(config)?;
    write_outputs(&outcome, &config.output_dir)?;
    Ok(outcome.report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub name: String,
    pub method: String,
    pub status: String,
    pub error: Option<String>,
    pub mean: Option<MetricSummary>,
    pub std: Option<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub rows: Vec<MatrixRow>,
}

impl MatrixReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// `method,accuracy,precision,recall,f1,auc,status,error`; failed rows
    /// leave the metric cells empty.
    pub fn write_csv(&self, writer: impl std::io::Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["method", "accuracy", "precision", "recall", "f1", "auc", "status", "error"])?;
        for r in &self.rows {
            let mut rec = vec![r.method.clone()];
            match &r.mean {
                Some(m) => rec.extend(m.values().iter().map(|v| v.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), 5)),
            }
            rec.push(r.status.clone());
            rec.push(r.error.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs each `(name, config)` in order, each into `out_dir/<name>`, then
/// writes `matrix.csv` and `comparison.json`. A failing experiment becomes an
/// error row and the rest still run.
pub fn run_matrix(configs: &[(String, ExperimentConfig)], out_dir: &Path) -> Result<MatrixReport> {
    if configs.is_empty() {
        return Err(ExperimentError::Config("the matrix has no experiments".into()));
    }
    let mut rows = Vec::with_capacity(configs.len());
    for (name, config) in configs {
        let mut config = config.clone();
        config.output_dir = out_dir.join(name);
        let method = config.method_name();
        rows.push(match run_experiment(&config) {
            Ok(report) => MatrixRow {
                name: name.clone(),
                method,
                status: "ok".into(),
                error: None,
                mean: Some(report.aggregate.mean),
                std: Some(report.aggregate.std),
            },
            Err(e) => MatrixRow {
                name: name.clone(),
                method,
                status: "error".into(),
                error: Some(e.to_string()),
                mean: None,
                std: None,
            },
        });
    }
    let report = MatrixReport { rows };
    std::fs::create_dir_all(out_dir).map_err(|source| ExperimentError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    write_file(&out_dir.join("matrix.csv"), &csv_bytes(|b| report.write_csv(b))?)?;
    write_file(&out_dir.join("comparison.json"), &erased::Json::pretty(&report)?)?;
    Ok(report)
}

/// Every `*.json` file in `dir`, sorted by file name, keyed by file stem.
pub fn load_config_dir(dir: &Path) -> Result<Vec<(String, ExperimentConfig)>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().expect("json file").to_string_lossy().into_owned();
            let config = parse_config(&p).map_err(|e| ExperimentError::Config(format!("{}: {e}", p.display())))?;
            Ok((name, config))
        })
        .collect()
}

/// The eight front end × classifier combinations, in table order, sharing
/// one data source and evaluation setting.
pub fn table5_configs(
    data: DataSource,
    evaluation: EvaluationConfig,
    pso: PsoConfig,
    forest: ForestConfig,
    tree: TreeConfig,
    transformer: TransformerConfig,
    tab: TabTransformerConfig,
) -> Vec<(String, ExperimentConfig)> {
    let pca = FrontEnd::Pca(PcaConfig::default());
    let pso = FrontEnd::Pso(pso);
    let combos = [
        (pca.clone(), Classifier::Rf(forest.clone())),
        (pca.clone(), Classifier::Dt(tree.clone())),
        (pso.clone(), Classifier::Rf(forest)),
        (pso.clone(), Classifier::Dt(tree)),
        (pca.clone(), Classifier::Transformer(transformer.clone())),
        (pca, Classifier::TabTransformer(tab.clone())),
        (pso.clone(), Classifier::Transformer(transformer)),
        (pso, Classifier::TabTransformer(tab)),
    ];
    combos
        .into_iter()
        .enumerate()
        .map(|(i, (front_end, classifier))| {
            let config = ExperimentConfig {
                name: None,
                data: data.clone(),
                front_end,
                classifier,
                evaluation: evaluation.clone(),
                output_dir: default_output_dir(),
            };
            let name = format!("{}_{}", i + 1, config.slug());
            (name.clone(), ExperimentConfig { name: Some(name), ..config })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "data": {"synthetic": {"n_rows": 60, "n_numerical": 4, "n_informative": 2, "seed": 1}},
        "front_end": "pso",
        "classifier": "tabtransformer"
    }"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        let FrontEnd::Pso(p) = &c.front_end else { panic!() };
        assert_eq!((p.swarm_size, p.max_iterations), (20, 1000));
        assert_eq!((p.inertia, p.cognitive, p.social), (0.7, 1.5, 2.0));
        let Classifier::TabTransformer(t) = &c.classifier else { panic!() };
        assert_eq!(t.num_heads, 4);
        assert_eq!(c.evaluation.k, 10);
        assert!(!c.evaluation.fast_pso_mode);
        assert_eq!(c.method_name(), "PSO + TabTransformer");
    }

    #[test]
    fn unknown_key_is_named_with_its_path() {
        let json = MINIMAL.replace(r#""front_end": "pso""#, r#""front_end": {"pso": {"swam_size": 10}}"#);
        let err = parse_config_str(&json).unwrap_err().to_string();
        assert!(err.contains("swam_size"), "{err}");
        assert!(err.contains("front_end"), "{err}");

        let top = MINIMAL.replace(r#""front_end""#, r#""frontend""#);
        assert!(parse_config_str(&top).unwrap_err().to_string().contains("frontend"));
        let unknown = MINIMAL.replace(r#""tabtransformer""#, r#""svm""#);
        assert!(parse_config_str(&unknown).unwrap_err().to_string().contains("svm"));
    }

    #[test]
    fn explicit_values_override_defaults() {
        let json = MINIMAL.replace(r#""tabtransformer""#, r#"{"tabtransformer": {"num_heads": 8}}"#);
        let c = parse_config_str(&json).unwrap();
        let Classifier::TabTransformer(t) = &c.classifier else { panic!() };
        assert_eq!(t.num_heads, 8);
        assert_eq!(t.embedding_dim, 8);
    }

    #[test]
    fn resolved_echo_parses_back_identically() {
        let c = parse_config_str(MINIMAL).unwrap();
        let echo = serde_json::to_string(&c).unwrap();
        assert!(echo.contains("\"swarm_size\":20"));
        assert_eq!(parse_config_str(&echo).unwrap(), c);
        let none = MINIMAL.replace(r#""pso""#, r#""none""#);
        let c = parse_config_str(&none).unwrap();
        assert_eq!(parse_config_str(&serde_json::to_string(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let json = MINIMAL.replace(r#""front_end": "pso""#, r#""front_end": {"pca": {"retain": 1.5}}"#);
        let err = parse_config_str(&json).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let json = MINIMAL.replace(r#""n_informative": 2"#, r#""n_informative": 9"#);
        assert_eq!(parse_config_str(&json).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn missing_csv_is_a_data_error() {
        let json = r#"{
            "data": {"csv": {"path": "/nonexistent/file.csv", "preset": "hfea"}},
            "front_end": "none",
            "classifier": "dt"
        }"#;
        let c = parse_config_str(json).unwrap();
        assert_eq!(execute(&c).err().unwrap().exit_code(), 3);
    }
}
