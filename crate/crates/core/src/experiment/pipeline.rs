//! The fold-level pipeline: min-max rescaling, front end, classifier.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::{self, init_params, DeepModel, ModelInput, Split, TrainedModel};
use crate::classic::{
    forest_fit, forest_predict_proba, logreg_predict_proba, tree_fit, tree_predict_proba, DecisionTreeModel,
    LogRegModel, RandomForestModel,
};
use crate::dataset::{ColumnMeta, Dataset};
use crate::evaluation::{stratified_holdout, FittedPipeline, FoldContext, FoldDetails, Pipeline};
use crate::pca::{pca_fit, pca_transform, PcaModel};
use crate::pso::pso_run;

use super::{Classifier, FrontEnd};

/// Min-max statistics of the numerical columns of a training subset.
/// Categorical columns pass through untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub range: Vec<f64>,
    pub categorical: Vec<bool>,
}

impl MinMaxScaler {
    pub fn fit(data: &Dataset) -> Self {
        let x = data.x();
        let mut min = Vec::with_capacity(x.ncols());
        let mut range = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            min.push(lo);
            range.push(hi - lo);
        }
        Self {
            min,
            range,
            categorical: data.meta().iter().map(ColumnMeta::is_categorical).collect(),
        }
    }

    /// `(v − min) / range` per numerical column; constant columns map to 0.
    /// Rows outside the fitted range land outside [0, 1].
    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            if self.categorical[j] {
                continue;
            }
            let (lo, r) = (self.min[j], self.range[j]);
            col.mapv_inplace(|v| if r > 0.0 { (v - lo) / r } else { 0.0 });
        }
        out
    }
}

/// Categorical codes rescaled to `code / (cardinality − 1)`, matching
/// [`Dataset::dense_view`].
fn dense(x: &Array2<f64>, meta: &[ColumnMeta]) -> Array2<f64> {
    let mut out = x.clone();
    for (j, m) in meta.iter().enumerate() {
        if m.is_categorical() {
            let scale = if m.cardinality > 1 { 1.0 / (m.cardinality - 1) as f64 } else { 0.0 };
            out.column_mut(j).mapv_inplace(|v| v * scale);
        }
    }
    out
}

fn tabular(x: &Array2<f64>, meta: &[ColumnMeta]) -> (ModelInput, Vec<usize>) {
    let num: Vec<usize> = (0..meta.len()).filter(|&j| !meta[j].is_categorical()).collect();
    let cat: Vec<usize> = (0..meta.len()).filter(|&j| meta[j].is_categorical()).collect();
    let input = ModelInput {
        numerical: x.select(Axis(1), &num),
        categorical: x.select(Axis(1), &cat).mapv(|v| v as usize),
    };
    (input, cat.iter().map(|&j| meta[j].cardinality).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrontEndState {
    None,
    Mask(Vec<usize>),
    Pca(PcaModel),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierState {
    LogReg(LogRegModel),
    Tree(DecisionTreeModel),
    Forest(RandomForestModel),
    Deep(TrainedModel),
}

/// Everything needed to score new rows of the original column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedExperiment {
    pub feature_names: Vec<String>,
    pub meta: Vec<ColumnMeta>,
    pub scaler: MinMaxScaler,
    pub front_end: FrontEndState,
    pub classifier: ClassifierState,
    pub details: FoldDetails,
}

enum Design {
    Dense(Array2<f64>),
    Tabular(ModelInput, Vec<usize>),
}

impl FittedExperiment {
    /// A classifier fitted directly on dataset columns, with no rescaling or
    /// front end.
    pub fn bare(feature_names: Vec<String>, meta: Vec<ColumnMeta>, classifier: ClassifierState) -> Self {
        let p = meta.len();
        Self {
            feature_names,
            scaler: MinMaxScaler {
                min: vec![0.0; p],
                range: vec![1.0; p],
                categorical: meta.iter().map(ColumnMeta::is_categorical).collect(),
            },
            meta,
            front_end: FrontEndState::None,
            classifier,
            details: FoldDetails::default(),
        }
    }

    /// Classifier input for scaled rows.
    fn design(&self, x_scaled: &Array2<f64>, tab: bool) -> Result<Design, String> {
        design(&self.front_end, &self.meta, x_scaled, tab)
    }

    pub fn predict_matrix(&self, x: &Array2<f64>) -> Result<Vec<f64>, String> {
        if x.ncols() != self.meta.len() {
            return Err(format!("input has {} columns, model expects {}", x.ncols(), self.meta.len()));
        }
        let scaled = self.scaler.apply(x);
        let tab = matches!(&self.classifier, ClassifierState::Deep(m) if matches!(m.model, DeepModel::TabTransformer(_)));
        let design = self.design(&scaled, tab)?;
        let err = |e: &dyn std::fmt::Display| e.to_string();
        match (&self.classifier, design) {
            (ClassifierState::LogReg(m), Design::Dense(d)) => logreg_predict_proba(m, &d).map_err(|e| err(&e)),
            (ClassifierState::Tree(m), Design::Dense(d)) => tree_predict_proba(m, &d).map_err(|e| err(&e)),
            (ClassifierState::Forest(m), Design::Dense(d)) => forest_predict_proba(m, &d).map_err(|e| err(&e)),
            (ClassifierState::Deep(m), Design::Dense(d)) => {
                attention::predict_proba(m, &ModelInput::numerical_only(d)).map_err(|e| err(&e))
            }
            (ClassifierState::Deep(m), Design::Tabular(input, _)) => {
                attention::predict_proba(m, &input).map_err(|e| err(&e))
            }
            _ => Err("classifier and input representation disagree".into()),
        }
    }
}

fn design(front: &FrontEndState, meta: &[ColumnMeta], x: &Array2<f64>, tab: bool) -> Result<Design, String> {
    Ok(match front {
        FrontEndState::Pca(model) => {
            let z = pca_transform(model, &dense(x, meta)).map_err(|e| e.to_string())?;
            if tab {
                Design::Tabular(ModelInput::numerical_only(z), Vec::new())
            } else {
                Design::Dense(z)
            }
        }
        FrontEndState::None | FrontEndState::Mask(_) => {
            let (x, meta): (Array2<f64>, Vec<ColumnMeta>) = match front {
                FrontEndState::Mask(cols) => (x.select(Axis(1), cols), cols.iter().map(|&j| meta[j].clone()).collect()),
                _ => (x.clone(), meta.to_vec()),
            };
            if tab {
                let (input, cards) = tabular(&x, &meta);
                Design::Tabular(input, cards)
            } else {
                Design::Dense(dense(&x, &meta))
            }
        }
    })
}

impl FittedPipeline for FittedExperiment {
    fn predict_proba(&self, data: &Dataset) -> Result<Vec<f64>, String> {
        self.predict_matrix(data.x())
    }

    fn details(&self) -> FoldDetails {
        self.details.clone()
    }
}

/// Front end plus classifier as configured, optionally with a feature mask
/// chosen once outside cross-validation.
#[derive(Debug, Clone)]
pub struct ExperimentPipeline {
    pub front_end: FrontEnd,
    pub classifier: Classifier,
    /// Held-out share of each training fold used for early stopping.
    pub validation_fraction: f64,
    pub fixed_mask: Option<Vec<usize>>,
}

impl ExperimentPipeline {
    pub fn fit_experiment(&self, train: &Dataset, ctx: FoldContext) -> Result<FittedExperiment, String> {
        let scaler = MinMaxScaler::fit(train);
        // Training rows map into [0, 1] under their own statistics; the clamp
        // only absorbs rounding.
        let scaled = scaler.apply(train.x()).mapv(|v| v.clamp(0.0, 1.0));
        let train_scaled = train.with_features(scaled).map_err(|e| e.to_string())?;
        let names = train.feature_names();
        let mut details = FoldDetails::default();

        let front_end = match (&self.front_end, &self.fixed_mask) {
            (FrontEnd::None, _) => FrontEndState::None,
            (FrontEnd::Pso(_), Some(mask)) => FrontEndState::Mask(mask.clone()),
            (FrontEnd::Pso(config), None) => {
                let mut config = config.clone();
                config.seed = config.seed.wrapping_add(ctx.seed);
                let result = pso_run(&train_scaled, &config).map_err(|e| format!("pso: {e}"))?;
                FrontEndState::Mask(result.mask.indices())
            }
            (FrontEnd::Pca(p), _) => {
                let model = pca_fit(&train_scaled.dense_view(), p.retain).map_err(|e| format!("pca: {e}"))?;
                FrontEndState::Pca(model)
            }
        };
        match &front_end {
            FrontEndState::Mask(cols) => {
                if cols.is_empty() {
                    return Err("pso: no features selected".into());
                }
                details.selected_features = Some(cols.iter().map(|&j| names[j].clone()).collect());
            }
            FrontEndState::Pca(m) => details.pca_components = Some(m.k),
            FrontEndState::None => {}
        }

        let tab = matches!(self.classifier, Classifier::TabTransformer(_));
        let design = design(&front_end, train.meta(), train_scaled.x(), tab)?;
        let y = train.y();
        let classifier = match (&self.classifier, design) {
            (Classifier::Dt(c), Design::Dense(d)) => ClassifierState::Tree(tree_fit(&d, y, c).map_err(|e| format!("dt: {e}"))?),
            (Classifier::Rf(c), Design::Dense(d)) => {
                let mut c = c.clone();
                c.seed = c.seed.wrapping_add(ctx.seed);
                ClassifierState::Forest(forest_fit(&d, y, &c).map_err(|e| format!("rf: {e}"))?)
            }
            (Classifier::Transformer(c), Design::Dense(d)) => {
                let mut c = c.clone();
                c.input_dim = d.ncols();
                let (model, curves) = self.train_deep(DeepModel::Transformer(c), &ModelInput::numerical_only(d), y, ctx)?;
                details.curves = Some(curves);
                ClassifierState::Deep(model)
            }
            (Classifier::TabTransformer(c), Design::Tabular(input, cards)) => {
                let mut c = c.clone();
                c.n_numerical = input.numerical.ncols();
                c.categorical_cardinalities = cards;
                let (model, curves) = self.train_deep(DeepModel::TabTransformer(c), &input, y, ctx)?;
                details.curves = Some(curves);
                ClassifierState::Deep(model)
            }
            _ => return Err("classifier and input representation disagree".into()),
        };
        Ok(FittedExperiment {
            feature_names: names,
            meta: train.meta().to_vec(),
            scaler,
            front_end,
            classifier,
            details,
        })
    }

    fn train_deep(
        &self,
        model: DeepModel,
        input: &ModelInput,
        y: &[u8],
        ctx: FoldContext,
    ) -> Result<(TrainedModel, attention::TrainingCurves), String> {
        let (fit_rows, val_rows) = stratified_holdout(y, self.validation_fraction, ctx.seed).map_err(|e| format!("validation split: {e}"))?;
        let pick = |rows: &[usize]| rows.iter().map(|&i| y[i]).collect::<Vec<u8>>();
        let (fit_in, val_in) = (input.select(&fit_rows), input.select(&val_rows));
        let (fit_y, val_y) = (pick(&fit_rows), pick(&val_rows));
        let params = init_params(&model, ctx.seed).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        rng.set_stream(2);
        attention::train(
            params,
            &model,
            Split { input: &fit_in, y: &fit_y },
            Split { input: &val_in, y: &val_y },
            &mut rng,
        )
        .map_err(|e| e.to_string())
    }
}

impl Pipeline for ExperimentPipeline {
    fn fit(&self, train: &Dataset, ctx: FoldContext) -> Result<Box<dyn FittedPipeline>, String> {
        Ok(Box::new(self.fit_experiment(train, ctx)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SynthSpec};

    #[test]
    fn scaler_maps_training_rows_into_unit_interval() {
        let (ds, _) = generate_synthetic(&SynthSpec {
            n_rows: 50,
            n_numerical: 3,
            n_categorical: 1,
            n_informative: 2,
            informative_indices: Vec::new(),
            noise_level: 0.3,
            seed: 1,
        })
        .unwrap();
        let part = ds.select_rows(&(0..20).collect::<Vec<_>>());
        let s = MinMaxScaler::fit(&part);
        let x = s.apply(part.x());
        for j in 0..3 {
            let col = x.column(j);
            assert_eq!(col.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
            assert_eq!(col.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
        }
        assert_eq!(x.column(3), part.x().column(3));
    }
}
