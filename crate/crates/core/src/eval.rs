//! Metrics and the cross-validation driver.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{standardize_fit, stratified_kfold, Dataset};
use crate::error::{Error, Result};
use crate::falk::{
    local_model_selection, train_falk, FalkModel, FalkParams, QbsvmLocalTrainer,
    QmsvmLocalTrainer,
};
use crate::kernel::KernelConfig;
use crate::qbsvm::{ensemble_decision, train_qbsvm_ensemble, EnsembleModel};
use crate::qmsvm::{
    qmsvm_decision, select_global_subset, train_qmsvm, MulticlassSvmModel, WeightingConfig,
};
use crate::qubo::{QbsvmQuboParams, QmsvmQuboParams};
use crate::sampler::{Sampler, SamplerConfig};
use crate::seeding;

/// Fraction of correct predictions.
pub fn accuracy(preds: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(preds, truth)?;
    let correct = preds.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / truth.len() as f64)
}

/// Mean per-class recall; classes absent from the truth are excluded.
pub fn balanced_accuracy(preds: &[usize], truth: &[usize], classes: usize) -> Result<f64> {
    check_lengths(preds, truth)?;
    check_range(preds, truth, classes)?;
    let mut per_class = vec![(0usize, 0usize); classes]; // (correct, total)
    for (&p, &t) in preds.iter().zip(truth) {
        per_class[t].1 += 1;
        if p == t {
            per_class[t].0 += 1;
        }
    }
    let recalls: Vec<f64> = per_class
        .iter()
        .filter(|(_, total)| *total > 0)
        .map(|&(correct, total)| correct as f64 / total as f64)
        .collect();
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

/// Mean per-class F1 (`2PR / (P + R)`, zero when `P + R = 0`); classes
/// absent from both truth and predictions are excluded.
pub fn macro_f1(preds: &[usize], truth: &[usize], classes: usize) -> Result<f64> {
    check_lengths(preds, truth)?;
    check_range(preds, truth, classes)?;
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fal_neg = vec![0usize; classes];
    for (&p, &t) in preds.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fal_neg[t] += 1;
        }
    }
    let mut scores = Vec::new();
    for c in 0..classes {
        if tp[c] + fp[c] + fal_neg[c] == 0 {
            continue; // absent from truth and predictions
        }
        let precision = if tp[c] + fp[c] > 0 {
            tp[c] as f64 / (tp[c] + fp[c]) as f64
        } else {
            0.0
        };
        let recall = if tp[c] + fal_neg[c] > 0 {
            tp[c] as f64 / (tp[c] + fal_neg[c]) as f64
        } else {
            0.0
        };
        if precision + recall == 0.0 {
            scores.push(0.0);
        } else {
            scores.push(2.0 * precision * recall / (precision + recall));
        }
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// `confusion[truth][pred]` counts.
pub fn confusion_matrix(preds: &[usize], truth: &[usize], classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0usize; classes]; classes];
    for (&p, &t) in preds.iter().zip(truth) {
        m[t][p] += 1;
    }
    m
}

fn check_lengths(preds: &[usize], truth: &[usize]) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::InvalidData("no predictions to score".into()));
    }
    if preds.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} truths",
            preds.len(),
            truth.len()
        )));
    }
    Ok(())
}

fn check_range(preds: &[usize], truth: &[usize], classes: usize) -> Result<()> {
    if let Some(&bad) = preds.iter().chain(truth).find(|&&l| l >= classes) {
        return Err(Error::InvalidData(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// Summary statistics of one trained model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    pub center_count: Option<usize>,
    pub local_model_size: Option<usize>,
    pub slice_count: Option<usize>,
}

/// A trained model usable for prediction inside the CV driver.
pub trait Predictor: Send + Sync {
    /// Global class index for a standardized feature vector.
    fn predict(&self, x: &[f64]) -> usize;

    fn stats(&self) -> ModelStats {
        ModelStats::default()
    }
}

impl Predictor for FalkModel {
    fn predict(&self, x: &[f64]) -> usize {
        FalkModel::predict(self, x)
    }

    fn stats(&self) -> ModelStats {
        ModelStats {
            center_count: Some(self.center_count()),
            local_model_size: Some(self.neighborhood_size()),
            slice_count: None,
        }
    }
}

impl Predictor for EnsembleModel {
    fn predict(&self, x: &[f64]) -> usize {
        usize::from(ensemble_decision(self, x) > 0)
    }

    fn stats(&self) -> ModelStats {
        ModelStats {
            center_count: None,
            local_model_size: self.slices.first().map(|s| s.support_points.rows()),
            slice_count: Some(self.slice_count()),
        }
    }
}

impl Predictor for MulticlassSvmModel {
    fn predict(&self, x: &[f64]) -> usize {
        qmsvm_decision(self, x)
    }

    fn stats(&self) -> ModelStats {
        ModelStats {
            center_count: None,
            local_model_size: Some(self.support_points.rows()),
            slice_count: None,
        }
    }
}

/// Fixed-label predictor; the training-free baseline.
pub struct ConstantPredictor(pub usize);

impl Predictor for ConstantPredictor {
    fn predict(&self, _x: &[f64]) -> usize {
        self.0
    }
}

/// A trainable method the CV driver can evaluate.
pub trait CvMethod: Sync {
    fn train(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Predictor>>;
    fn name(&self) -> &str;
}

/// Local binary classification: FaLK over QUBO-trained binary models, with
/// optional per-fold grid selection of the kernel width.
pub struct FalkQbsvmMethod {
    pub falk: FalkParams,
    pub kernel: KernelConfig,
    pub selection: bool,
    pub base: u32,
    pub bits: u32,
    pub penalty: f64,
    pub prune_ratio: f64,
    pub sampler: Arc<dyn Sampler>,
    pub sampler_cfg: SamplerConfig,
}

impl FalkQbsvmMethod {
    fn trainer(&self, kernel: KernelConfig) -> QbsvmLocalTrainer {
        QbsvmLocalTrainer {
            kernel,
            base: self.base,
            bits: self.bits,
            penalty: self.penalty,
            prune_ratio: self.prune_ratio,
            sampler: Arc::clone(&self.sampler),
            sampler_cfg: self.sampler_cfg,
        }
    }
}

impl CvMethod for FalkQbsvmMethod {
    fn train(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Predictor>> {
        let mut params = self.falk.clone();
        params.seed = seed;
        let kernel = if self.selection {
            local_model_selection(train, &params, |k| Box::new(self.trainer(*k)))?.config
        } else {
            self.kernel
        };
        let trainer = self.trainer(kernel);
        Ok(Box::new(train_falk(train, &params, &trainer)?))
    }

    fn name(&self) -> &str {
        "falk-qbsvm"
    }
}

/// Local multiclass classification: FaLK over QUBO-trained single-step
/// multiclass models.
pub struct FalkQmsvmMethod {
    pub falk: FalkParams,
    pub kernel: KernelConfig,
    pub selection: bool,
    pub bits: u32,
    pub penalty: f64,
    pub regularization: f64,
    pub weighting: WeightingConfig,
    pub prune_ratio: f64,
    pub sampler: Arc<dyn Sampler>,
    pub sampler_cfg: SamplerConfig,
}

impl FalkQmsvmMethod {
    fn trainer(&self, kernel: KernelConfig) -> QmsvmLocalTrainer {
        QmsvmLocalTrainer {
            kernel,
            bits: self.bits,
            penalty: self.penalty,
            regularization: self.regularization,
            prune_ratio: self.prune_ratio,
            weighting: self.weighting,
            sampler: Arc::clone(&self.sampler),
            sampler_cfg: self.sampler_cfg,
        }
    }
}

impl CvMethod for FalkQmsvmMethod {
    fn train(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Predictor>> {
        let mut params = self.falk.clone();
        params.seed = seed;
        let kernel = if self.selection {
            local_model_selection(train, &params, |k| Box::new(self.trainer(*k)))?.config
        } else {
            self.kernel
        };
        let trainer = self.trainer(kernel);
        Ok(Box::new(train_falk(train, &params, &trainer)?))
    }

    fn name(&self) -> &str {
        "falk-qmsvm"
    }
}

/// Global binary classification: the sliced ensemble.
pub struct GlobalQbsvmMethod {
    pub params: QbsvmQuboParams,
    pub slice_size: usize,
    pub prune_ratio: f64,
    pub sampler: Arc<dyn Sampler>,
    pub sampler_cfg: SamplerConfig,
}

impl CvMethod for GlobalQbsvmMethod {
    fn train(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Predictor>> {
        let mut cfg = self.sampler_cfg;
        cfg.seed = seed;
        Ok(Box::new(train_qbsvm_ensemble(
            train,
            &self.params,
            self.prune_ratio,
            self.sampler.as_ref(),
            &cfg,
            self.slice_size,
            seed,
        )?))
    }

    fn name(&self) -> &str {
        "qbsvm"
    }
}

/// Global multiclass classification on a stratified subset of the training
/// data; the full training set serves as the weighting validation set.
pub struct GlobalQmsvmMethod {
    pub params: QmsvmQuboParams,
    pub subset_size: usize,
    pub weighting: WeightingConfig,
    pub prune_ratio: f64,
    pub sampler: Arc<dyn Sampler>,
    pub sampler_cfg: SamplerConfig,
}

impl CvMethod for GlobalQmsvmMethod {
    fn train(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Predictor>> {
        let subset = select_global_subset(train, self.subset_size, seed)?;
        let mut cfg = self.sampler_cfg;
        cfg.seed = seed;
        Ok(Box::new(train_qmsvm(
            &subset,
            &self.params,
            self.prune_ratio,
            self.sampler.as_ref(),
            &cfg,
            &self.weighting,
            Some(train),
        )?))
    }

    fn name(&self) -> &str {
        "qmsvm"
    }
}

/// Majority-class baseline.
pub struct MajorityBaselineMethod;

impl CvMethod for MajorityBaselineMethod {
    fn train(&self, train: &Dataset, _seed: u64) -> Result<Box<dyn Predictor>> {
        let counts = train.class_counts();
        let majority = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c)
            .unwrap_or(0);
        Ok(Box::new(ConstantPredictor(majority)))
    }

    fn name(&self) -> &str {
        "majority"
    }
}

/// Per-fold outcome inside an [`EvalReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub accuracy: Option<f64>,
    pub stats: Option<ModelStats>,
    pub error: Option<String>,
}

/// Pooled cross-validation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub folds: usize,
    pub truth: Vec<usize>,
    /// Pooled predictions in original row order; `None` where the fold's
    /// training failed.
    pub predictions: Vec<Option<usize>>,
    pub fold_of: Vec<usize>,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub macro_f1: f64,
    /// `confusion[truth][pred]` over the scored predictions.
    pub confusion: Vec<Vec<usize>>,
    pub per_fold: Vec<FoldOutcome>,
    /// True when at least one fold failed to train.
    pub partial: bool,
}

impl EvalReport {
    /// `key: value` text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "method: {}", self.method);
        let _ = writeln!(out, "folds: {}", self.folds);
        let _ = writeln!(out, "samples: {}", self.truth.len());
        let _ = writeln!(out, "accuracy: {}", self.accuracy);
        let _ = writeln!(out, "balanced_accuracy: {}", self.balanced_accuracy);
        let _ = writeln!(out, "macro_f1: {}", self.macro_f1);
        let _ = writeln!(out, "partial: {}", self.partial);
        for row in &self.confusion {
            let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "confusion: {}", cells.join(" "));
        }
        for fold in &self.per_fold {
            match (&fold.accuracy, &fold.error) {
                (Some(acc), _) => {
                    let _ = writeln!(out, "fold_{}_accuracy: {}", fold.fold, acc);
                }
                (None, Some(err)) => {
                    let _ = writeln!(out, "fold_{}_error: {}", fold.fold, err);
                }
                _ => {}
            }
            if let Some(stats) = &fold.stats {
                if let Some(c) = stats.center_count {
                    let _ = writeln!(out, "fold_{}_centers: {c}", fold.fold);
                }
                if let Some(s) = stats.slice_count {
                    let _ = writeln!(out, "fold_{}_slices: {s}", fold.fold);
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidData(format!("report serialization failed: {e}")))
    }
}

/// Stratified cross-validation with per-fold standardization fitted on the
/// training portion only. Fold splits depend only on `(data, folds, seed)`,
/// so different methods evaluated with the same seed share them. Training
/// failures are recorded per fold and leave the report partial.
pub fn run_cv(
    data: &Dataset,
    method: &dyn CvMethod,
    folds: usize,
    seed: u64,
) -> Result<EvalReport> {
    let assignment = stratified_kfold(data, folds, seed)?;
    let mut predictions: Vec<Option<usize>> = vec![None; data.len()];
    let mut per_fold = Vec::with_capacity(folds);
    let mut partial = false;

    for fold in 0..folds {
        let (train_idx, test_idx) = assignment.split(fold);
        let train = data.select(&train_idx)?;
        let scaler = standardize_fit(&train);
        let train_std = scaler.apply(&train)?;
        let fold_seed = seeding::derive(seed, fold as u64);
        match method.train(&train_std, fold_seed) {
            Ok(model) => {
                let mut correct = 0usize;
                for &idx in &test_idx {
                    let row = data.features().row(idx).to_vec();
                    let std_row: Vec<f64> = row
                        .iter()
                        .enumerate()
                        .map(|(j, v)| (v - scaler.means[j]) / scaler.stds[j])
                        .collect();
                    let pred = model.predict(&std_row);
                    if pred == data.labels()[idx] {
                        correct += 1;
                    }
                    predictions[idx] = Some(pred);
                }
                per_fold.push(FoldOutcome {
                    fold,
                    accuracy: Some(correct as f64 / test_idx.len() as f64),
                    stats: Some(model.stats()),
                    error: None,
                });
            }
            Err(err) => {
                partial = true;
                per_fold.push(FoldOutcome {
                    fold,
                    accuracy: None,
                    stats: None,
                    error: Some(err.to_string()),
                });
            }
        }
    }

    let scored: Vec<(usize, usize)> = predictions
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|p| (p, data.labels()[i])))
        .collect();
    let preds: Vec<usize> = scored.iter().map(|&(p, _)| p).collect();
    let truth: Vec<usize> = scored.iter().map(|&(_, t)| t).collect();
    let classes = data.class_count();
    let (acc, bal, f1, confusion) = if preds.is_empty() {
        (0.0, 0.0, 0.0, vec![vec![0; classes]; classes])
    } else {
        (
            accuracy(&preds, &truth)?,
            balanced_accuracy(&preds, &truth, classes)?,
            macro_f1(&preds, &truth, classes)?,
            confusion_matrix(&preds, &truth, classes),
        )
    };

    Ok(EvalReport {
        method: method.name().to_string(),
        folds,
        truth: data.labels().to_vec(),
        predictions,
        fold_of: assignment.fold_of,
        accuracy: acc,
        balanced_accuracy: bal,
        macro_f1: f1,
        confusion,
        per_fold,
        partial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_blobs, BlobSpec};
    use crate::matrix::Matrix;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0], &[0, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 1, 1]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn balanced_accuracy_examples() {
        // all predicted class 0, truth half and half -> recalls (1, 0)
        assert_eq!(
            balanced_accuracy(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap(),
            0.5
        );
        assert_eq!(balanced_accuracy(&[0, 1], &[0, 1], 2).unwrap(), 1.0);
        // class 1 absent from truth: excluded from the mean
        assert_eq!(balanced_accuracy(&[0, 0], &[0, 0], 2).unwrap(), 1.0);
    }

    #[test]
    fn macro_f1_examples() {
        assert_eq!(macro_f1(&[0, 1], &[0, 1], 2).unwrap(), 1.0);
        // preds all 0 on half/half truth: F1 = (2/3 + 0) / 2
        let v = macro_f1(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        // class 2 absent from both: excluded
        assert_eq!(macro_f1(&[0, 1], &[0, 1], 3).unwrap(), 1.0);
    }

    #[test]
    fn metric_bounds_and_confusion_consistency() {
        let preds = [0, 1, 1, 2, 0, 2, 1];
        let truth = [0, 1, 2, 2, 1, 2, 1];
        let acc = accuracy(&preds, &truth).unwrap();
        let bal = balanced_accuracy(&preds, &truth, 3).unwrap();
        let f1 = macro_f1(&preds, &truth, 3).unwrap();
        for v in [acc, bal, f1] {
            assert!((0.0..=1.0).contains(&v));
        }
        let confusion = confusion_matrix(&preds, &truth, 3);
        let diag: usize = (0..3).map(|c| confusion[c][c]).sum();
        assert_eq!(diag as f64 / truth.len() as f64, acc);
        for c in 0..3 {
            let row_sum: usize = confusion[c].iter().sum();
            assert_eq!(row_sum, truth.iter().filter(|&&t| t == c).count());
        }
    }

    fn balanced_blobs(per_class: usize, seed: u64) -> Dataset {
        make_blobs(
            &[
                BlobSpec {
                    center: vec![0.0, 0.0],
                    sigma: 1.0,
                    count: per_class,
                },
                BlobSpec {
                    center: vec![8.0, 0.0],
                    sigma: 1.0,
                    count: per_class,
                },
            ],
            seed,
        )
        .unwrap()
    }

    #[test]
    fn majority_baseline_is_chance_on_balanced_data() {
        let ds = balanced_blobs(30, 1);
        let report = run_cv(&ds, &MajorityBaselineMethod, 5, 7).unwrap();
        assert!((report.accuracy - 0.5).abs() < 0.15);
        assert!(!report.partial);
        assert_eq!(report.predictions.iter().filter(|p| p.is_some()).count(), 60);
    }

    #[test]
    fn same_seed_gives_same_folds_across_methods() {
        let ds = balanced_blobs(20, 2);
        let a = run_cv(&ds, &MajorityBaselineMethod, 4, 9).unwrap();
        let b = run_cv(&ds, &MajorityBaselineMethod, 4, 9).unwrap();
        assert_eq!(a.fold_of, b.fold_of);
        assert_eq!(stratified_kfold(&ds, 4, 9).unwrap().fold_of, a.fold_of);
    }

    #[test]
    fn leave_one_out_runs() {
        let ds = Dataset::new(
            Matrix::from_rows(&[vec![0.0], vec![1.0], vec![8.0], vec![9.0]]).unwrap(),
            vec![0, 0, 1, 1],
            2,
        )
        .unwrap();
        let report = run_cv(&ds, &MajorityBaselineMethod, 4, 3).unwrap();
        assert_eq!(report.predictions.len(), 4);
        assert!(report.predictions.iter().all(Option::is_some));
    }

    #[test]
    fn pooled_vs_fold_mean_stays_close() {
        let ds = balanced_blobs(25, 5);
        let report = run_cv(&ds, &MajorityBaselineMethod, 4, 11).unwrap();
        let fold_mean: f64 = report
            .per_fold
            .iter()
            .filter_map(|f| f.accuracy)
            .sum::<f64>()
            / report.folds as f64;
        let bound = (ds.class_count() * report.folds) as f64 / ds.len() as f64;
        assert!((report.accuracy - fold_mean).abs() <= bound);
    }

    struct FailingMethod;

    impl CvMethod for FailingMethod {
        fn train(&self, _: &Dataset, _: u64) -> Result<Box<dyn Predictor>> {
            Err(Error::Sampler("backend offline".into()))
        }

        fn name(&self) -> &str {
            "failing"
        }
    }

    #[test]
    fn failed_folds_leave_partial_report() {
        let ds = balanced_blobs(10, 6);
        let report = run_cv(&ds, &FailingMethod, 2, 1).unwrap();
        assert!(report.partial);
        assert!(report.predictions.iter().all(Option::is_none));
        assert_eq!(report.accuracy, 0.0);
        assert!(report.per_fold.iter().all(|f| f.error.is_some()));
    }

    #[test]
    fn report_serializations_are_stable() {
        let ds = balanced_blobs(10, 8);
        let a = run_cv(&ds, &MajorityBaselineMethod, 2, 4).unwrap();
        let b = run_cv(&ds, &MajorityBaselineMethod, 2, 4).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert!(a.to_text().contains("accuracy: "));
    }
}
