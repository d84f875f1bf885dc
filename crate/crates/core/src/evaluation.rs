//! Classification metrics, ROC AUC and stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::TrainingCurves;
use crate::dataset::Dataset;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{labels} labels but {scores} scores")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("confusion counts are empty")]
    EmptyCounts,
    #[error("ROC AUC needs both classes")]
    SingleClass,
    #[error("cannot split {n_rows} rows into {k} folds")]
    InvalidK { n_rows: usize, k: usize },
    #[error("class {class} has {count} rows, fewer than k = {k}")]
    ClassTooSmall { class: u8, count: usize, k: usize },
    #[error("fold {fold}: {message}")]
    Fold { fold: usize, message: String },
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// A row is predicted positive when its score is at least `threshold`.
pub fn confusion(y_true: &[u8], scores: &[f64], threshold: f64) -> Result<ConfusionCounts> {
    if y_true.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            labels: y_true.len(),
            scores: scores.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&y, &s) in y_true.iter().zip(scores) {
        match (y == 1, s >= threshold) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub counts: ConfusionCounts,
    pub threshold: f64,
    /// Names of metrics whose denominator was zero; they are reported as 0.
    pub undefined: Vec<String>,
}

fn ratio(num: usize, den: usize, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, precision, recall and F1 from a confusion table. AUC needs scores,
/// so it is left at 0 and flagged undefined; [`score_report`] fills it in.
pub fn compute_metrics(counts: ConfusionCounts) -> Result<MetricsReport> {
    let ConfusionCounts { tp, tn, fp, fn_ } = counts;
    if counts.total() == 0 {
        return Err(EvalError::EmptyCounts);
    }
    let mut undefined = Vec::new();
    let accuracy = (tp + tn) as f64 / counts.total() as f64;
    let precision = ratio(tp, tp + fp, "precision", &mut undefined);
    let recall = ratio(tp, tp + fn_, "recall", &mut undefined);
    let f1 = if precision + recall == 0.0 {
        undefined.push("f1".into());
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    undefined.push("auc".into());
    Ok(MetricsReport {
        accuracy,
        precision,
        recall,
        f1,
        auc: 0.0,
        counts,
        threshold: DEFAULT_THRESHOLD,
        undefined,
    })
}

/// Mann–Whitney estimate of P(score of a random positive > score of a random
/// negative), ties counted one half. Runs in O(n log n) via midranks.
pub fn roc_auc(y_true: &[u8], scores: &[f64]) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            labels: y_true.len(),
            scores: scores.len(),
        });
    }
    let n_pos = y_true.iter().filter(|&&y| y == 1).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of doubled midranks keeps everything in exact integer arithmetic.
    let mut pos_rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let doubled_midrank = (i + 1 + j + 1) as u128;
        for &r in &order[i..=j] {
            if y_true[r] == 1 {
                pos_rank_sum2 += doubled_midrank;
            }
        }
        i = j + 1;
    }
    let (p, q) = (n_pos as u128, n_neg as u128);
    let u2 = pos_rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * q) as f64)
}

/// Full report for a score vector: thresholded metrics plus AUC (0 and
/// flagged when the labels hold a single class).
pub fn score_report(y_true: &[u8], scores: &[f64], threshold: f64) -> Result<MetricsReport> {
    let mut report = compute_metrics(confusion(y_true, scores, threshold)?)?;
    report.threshold = threshold;
    match roc_auc(y_true, scores) {
        Ok(auc) => {
            report.auc = auc;
            report.undefined.retain(|m| m != "auc");
        }
        Err(EvalError::SingleClass) => {}
        Err(e) => return Err(e),
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Assigns rows to `k` folds. With `stratify_by`, each class is shuffled
/// separately and dealt round-robin, the deal continuing across classes so
/// overall fold sizes still differ by at most one.
pub fn kfold_split(n_rows: usize, k: usize, seed: u64, stratify_by: Option<&[u8]>) -> Result<FoldPlan> {
    if k < 2 || k > n_rows {
        return Err(EvalError::InvalidK { n_rows, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = match stratify_by {
        Some(y) => {
            if y.len() != n_rows {
                return Err(EvalError::LengthMismatch {
                    labels: y.len(),
                    scores: n_rows,
                });
            }
            let mut groups = Vec::new();
            for class in [0u8, 1] {
                let rows: Vec<usize> = (0..n_rows).filter(|&i| y[i] == class).collect();
                if rows.len() < k {
                    return Err(EvalError::ClassTooSmall {
                        class,
                        count: rows.len(),
                        k,
                    });
                }
                groups.push(rows);
            }
            groups
        }
        None => vec![(0..n_rows).collect()],
    };
    let mut assignments = vec![0; n_rows];
    let mut next = 0;
    for mut rows in groups {
        rows.shuffle(&mut rng);
        for r in rows {
            assignments[r] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldPlan { k, assignments, seed })
}

/// Splits row indices into `(kept, held_out)`: each class is shuffled with
/// `seed` and its first `round(len · held_out_fraction)` rows are held out.
/// Both sides keep both classes; both index lists are sorted.
pub fn stratified_holdout(y: &[u8], held_out_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::new();
    let mut held = Vec::new();
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        rows.shuffle(&mut rng);
        let cut = (rows.len() as f64 * held_out_fraction).round() as usize;
        if cut == 0 || cut >= rows.len() {
            return Err(EvalError::ClassTooSmall {
                class,
                count: rows.len(),
                k: 2,
            });
        }
        held.extend_from_slice(&rows[..cut]);
        kept.extend_from_slice(&rows[cut..]);
    }
    kept.sort_unstable();
    held.sort_unstable();
    Ok((kept, held))
}

/// Extra per-fold output a fitted pipeline may expose.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FoldDetails {
    pub selected_features: Option<Vec<String>>,
    pub pca_components: Option<usize>,
    pub curves: Option<TrainingCurves>,
}

/// What a fold's model sees while fitting.
#[derive(Debug, Clone, Copy)]
pub struct FoldContext {
    pub fold: usize,
    /// `plan.seed + fold`, the fold's own RNG stream.
    pub seed: u64,
}

pub trait FittedPipeline: Send {
    fn predict_proba(&self, data: &Dataset) -> Result<Vec<f64>, String>;

    fn details(&self) -> FoldDetails {
        FoldDetails::default()
    }
}

/// A front end plus classifier that can be fitted on a training subset.
pub trait Pipeline: Sync {
    fn fit(&self, train: &Dataset, ctx: FoldContext) -> Result<Box<dyn FittedPipeline>, String>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
}

impl MetricSummary {
    pub fn of(r: &MetricsReport) -> Self {
        Self {
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            auc: r.auc,
        }
    }

    /// `[accuracy, precision, recall, f1, auc]`.
    pub fn values(&self) -> [f64; 5] {
        [self.accuracy, self.precision, self.recall, self.f1, self.auc]
    }

    fn from_values(v: [f64; 5]) -> Self {
        Self {
            accuracy: v[0],
            precision: v[1],
            recall: v[2],
            f1: v[3],
            auc: v[4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: MetricSummary,
    /// Sample standard deviation (`n − 1`); zero for a single fold.
    pub std: MetricSummary,
}

/// Arithmetic mean and sample standard deviation of each metric.
pub fn aggregate(reports: &[MetricsReport]) -> Aggregate {
    let n = reports.len() as f64;
    let rows: Vec<[f64; 5]> = reports.iter().map(|r| MetricSummary::of(r).values()).collect();
    let mut mean = [0.0; 5];
    let mut std = [0.0; 5];
    for m in 0..5 {
        mean[m] = rows.iter().map(|r| r[m]).sum::<f64>() / n;
        if rows.len() > 1 {
            let ss: f64 = rows.iter().map(|r| (r[m] - mean[m]).powi(2)).sum();
            std[m] = (ss / (n - 1.0)).sqrt();
        }
    }
    Aggregate {
        mean: MetricSummary::from_values(mean),
        std: MetricSummary::from_values(std),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: MetricsReport,
    pub details: FoldDetails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
    pub aggregate: Aggregate,
}

/// Fits `pipeline` on each fold's training rows and scores the held-out rows.
/// Folds run concurrently; results come back in fold order.
pub fn cross_validate(pipeline: &dyn Pipeline, dataset: &Dataset, plan: &FoldPlan) -> Result<CvResult> {
    if plan.assignments.len() != dataset.n_rows() {
        return Err(EvalError::LengthMismatch {
            labels: dataset.n_rows(),
            scores: plan.assignments.len(),
        });
    }
    let folds: Vec<FoldResult> = (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            let err = |message: String| EvalError::Fold { fold, message };
            let train = dataset.select_rows(&plan.train_indices(fold));
            let test = dataset.select_rows(&plan.test_indices(fold));
            let ctx = FoldContext {
                fold,
                seed: plan.seed.wrapping_add(fold as u64),
            };
            let fitted = pipeline.fit(&train, ctx).map_err(err)?;
            let scores = fitted.predict_proba(&test).map_err(err)?;
            let metrics = score_report(test.y(), &scores, DEFAULT_THRESHOLD).map_err(|e| err(e.to_string()))?;
            Ok(FoldResult {
                fold,
                n_train: train.n_rows(),
                n_test: test.n_rows(),
                metrics,
                details: fitted.details(),
            })
        })
        .collect::<Result<_>>()?;
    let reports: Vec<MetricsReport> = folds.iter().map(|f| f.metrics.clone()).collect();
    Ok(CvResult {
        aggregate: aggregate(&reports),
        folds,
    })
}

/// One line of the method comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table5Row {
    pub method: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
}

impl Table5Row {
    pub fn new(method: impl Into<String>, m: &MetricSummary) -> Self {
        Self {
            method: method.into(),
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            auc: m.auc,
        }
    }
}

pub fn write_table5(writer: impl std::io::Write, rows: &[Table5Row]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SynthSpec};
    use rand::Rng;
    use std::collections::HashSet;
    use std::sync::Mutex;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn confusion_examples() {
        let c = confusion(&[1, 0], &[0.9, 0.1], 0.5).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, tn: 1, fp: 0, fn_: 0 });
        let c = confusion(&[0], &[0.5], 0.5).unwrap();
        assert_eq!(c.fp, 1);
        assert!(confusion(&[1], &[0.1, 0.2], 0.5).is_err());
    }

    #[test]
    fn confusion_matches_row_tally() {
        let mut r = rng(1);
        let y: Vec<u8> = (0..1000).map(|_| r.random_range(0..2)).collect();
        let s: Vec<f64> = (0..1000).map(|_| r.random::<f64>()).collect();
        let c = confusion(&y, &s, 0.5).unwrap();
        let mut tally = [0usize; 4];
        for i in 0..1000 {
            let pred = if s[i] >= 0.5 { 1 } else { 0 };
            tally[(y[i] as usize) * 2 + pred] += 1;
        }
        assert_eq!([c.tn, c.fp, c.fn_, c.tp], tally);
    }

    #[test]
    fn metric_examples() {
        let r = compute_metrics(ConfusionCounts { tp: 90, tn: 5, fp: 3, fn_: 2 }).unwrap();
        assert!((r.accuracy - 0.95).abs() < 1e-15);
        let r = compute_metrics(ConfusionCounts { tp: 8, tn: 0, fp: 2, fn_: 0 }).unwrap();
        assert!((r.precision - 0.8).abs() < 1e-15);
        // precision 1/2, recall 1
        let r = compute_metrics(ConfusionCounts { tp: 1, tn: 0, fp: 1, fn_: 0 }).unwrap();
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(compute_metrics(ConfusionCounts::default()), Err(EvalError::EmptyCounts));
    }

    #[test]
    fn undefined_denominators_are_flagged() {
        let r = compute_metrics(ConfusionCounts { tp: 0, tn: 4, fp: 0, fn_: 0 }).unwrap();
        assert_eq!(r.precision, 0.0);
        assert_eq!(r.recall, 0.0);
        assert_eq!(r.f1, 0.0);
        for m in ["precision", "recall", "f1"] {
            assert!(r.undefined.iter().any(|u| u == m));
        }
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0, 1, 0, 1], &[0.3; 4]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[1, 1], &[0.3, 0.4]), Err(EvalError::SingleClass));
    }

    fn pairwise_auc(y: &[u8], s: &[f64]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] == 1 && y[j] == 0 {
                    den += 1.0;
                    if s[i] > s[j] {
                        num += 1.0;
                    } else if s[i] == s[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_matches_pairwise_count_and_is_rank_invariant() {
        let mut r = rng(4);
        let y: Vec<u8> = (0..200).map(|_| r.random_range(0..2)).collect();
        // coarse scores so ties occur
        let s: Vec<f64> = (0..200).map(|_| (r.random::<f64>() * 20.0).floor() / 20.0).collect();
        let auc = roc_auc(&y, &s).unwrap();
        assert!((auc - pairwise_auc(&y, &s)).abs() < 1e-12);
        let cubed: Vec<f64> = s.iter().map(|v| v.powi(3)).collect();
        assert_eq!(roc_auc(&y, &cubed).unwrap(), auc);
    }

    #[test]
    fn folds_partition_and_balance() {
        let plan = kfold_split(10, 10, 0, None).unwrap();
        assert_eq!(plan.fold_sizes(), vec![1; 10]);

        let mut r = rng(2);
        let y: Vec<u8> = (0..103).map(|i| u8::from(i % 4 == 0 || r.random::<f64>() < 0.1)).collect();
        let plan = kfold_split(103, 10, 7, Some(&y)).unwrap();
        let mut sizes = plan.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, [vec![10; 7], vec![11; 3]].concat());
        let positives = y.iter().filter(|&&v| v == 1).count() as f64;
        for f in 0..10 {
            let test = plan.test_indices(f);
            let pos = test.iter().filter(|&&i| y[i] == 1).count() as f64;
            let expected = positives * test.len() as f64 / 103.0;
            assert!((pos - expected).abs() <= 1.0 + 1e-9, "fold {f}");
        }
        let mut seen: Vec<usize> = (0..10).flat_map(|f| plan.test_indices(f)).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..103).collect::<Vec<_>>());
    }

    #[test]
    fn holdout_is_stratified_and_disjoint() {
        let y: Vec<u8> = (0..100).map(|i| u8::from(i % 5 == 0)).collect();
        let (kept, held) = stratified_holdout(&y, 0.2, 3).unwrap();
        assert_eq!(held.len(), 20);
        assert_eq!(held.iter().filter(|&&i| y[i] == 1).count(), 4);
        let mut all = [kept.clone(), held.clone()].concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(stratified_holdout(&y, 0.2, 3).unwrap(), (kept, held));
        assert!(stratified_holdout(&[0, 0, 1], 0.2, 0).is_err());
    }

    #[test]
    fn fold_errors() {
        assert!(matches!(kfold_split(5, 10, 0, None), Err(EvalError::InvalidK { .. })));
        let y = [1, 0, 0, 0, 0, 0];
        assert!(matches!(
            kfold_split(6, 2, 0, Some(&y)),
            Err(EvalError::ClassTooSmall { class: 1, count: 1, k: 2 })
        ));
    }

    struct Majority;
    struct Constant(f64);
    impl FittedPipeline for Constant {
        fn predict_proba(&self, data: &Dataset) -> Result<Vec<f64>, String> {
            Ok(vec![self.0; data.n_rows()])
        }
    }
    impl Pipeline for Majority {
        fn fit(&self, train: &Dataset, _: FoldContext) -> Result<Box<dyn FittedPipeline>, String> {
            let pos = train.positive_count() * 2 > train.n_rows();
            Ok(Box::new(Constant(if pos { 1.0 } else { 0.0 })))
        }
    }

    fn synth(n_rows: usize, seed: u64) -> Dataset {
        generate_synthetic(&SynthSpec {
            n_rows,
            n_numerical: 6,
            n_categorical: 2,
            n_informative: 3,
            informative_indices: Vec::new(),
            noise_level: 0.5,
            seed,
        })
        .unwrap()
        .0
    }

    #[test]
    fn majority_baseline_accuracy_is_majority_fraction() {
        let ds = synth(300, 1);
        let plan = kfold_split(300, 10, 3, Some(ds.y())).unwrap();
        let cv = cross_validate(&Majority, &ds, &plan).unwrap();
        let pos = ds.positive_count() as f64 / 300.0;
        let majority = pos.max(1.0 - pos);
        assert!((cv.aggregate.mean.accuracy - majority).abs() < 0.01);
        let mean_acc = cv.folds.iter().map(|f| f.metrics.accuracy).sum::<f64>() / 10.0;
        assert!((mean_acc - cv.aggregate.mean.accuracy).abs() < 1e-12);
    }

    /// Records every row id a fitting step sees so the test can check it
    /// against the held-out fold.
    struct Spy(Mutex<Vec<(usize, Vec<usize>)>>);
    impl Pipeline for Spy {
        fn fit(&self, train: &Dataset, ctx: FoldContext) -> Result<Box<dyn FittedPipeline>, String> {
            self.0.lock().unwrap().push((ctx.fold, train.row_ids().to_vec()));
            Ok(Box::new(Constant(0.5)))
        }
    }

    #[test]
    fn fold_models_never_see_held_out_rows() {
        let ds = synth(120, 2);
        let plan = kfold_split(120, 5, 9, Some(ds.y())).unwrap();
        let spy = Spy(Mutex::new(Vec::new()));
        cross_validate(&spy, &ds, &plan).unwrap();
        let seen = spy.0.into_inner().unwrap();
        assert_eq!(seen.len(), 5);
        for (fold, rows) in seen {
            let held_out: HashSet<usize> = plan.test_indices(fold).into_iter().collect();
            assert!(rows.iter().all(|r| !held_out.contains(r)));
            assert_eq!(rows.len() + held_out.len(), 120);
        }
    }

    #[test]
    fn cross_validation_is_deterministic() {
        let ds = synth(100, 3);
        let plan = kfold_split(100, 4, 1, Some(ds.y())).unwrap();
        let a = cross_validate(&Majority, &ds, &plan).unwrap();
        let b = cross_validate(&Majority, &ds, &plan).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn table5_csv_has_header_and_rows() {
        let mut buf = Vec::new();
        let m = MetricSummary {
            accuracy: 0.9,
            precision: 0.8,
            recall: 0.7,
            f1: 0.75,
            auc: 0.95,
        };
        write_table5(&mut buf, &[Table5Row::new("PSO + RF", &m)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "method,accuracy,precision,recall,f1,auc\nPSO + RF,0.9,0.8,0.7,0.75,0.95\n"
        );
    }
}
