//! Single-step multiclass SVM training via QUBO sampling with
//! accuracy-weighted averaging of the best reads.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::gaussian_kernel;
use crate::matrix::Matrix;
use crate::qubo::{build_qmsvm_qubo, decode_taus, QmsvmQuboParams};
use crate::sampler::{Sampler, SamplerConfig};
use crate::seeding;

/// Trained multiclass model: weighted-average variables per support point
/// and class, plus the mapping from local class columns back to global
/// labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassSvmModel {
    pub support_points: Matrix,
    /// Row-major `M x classes`, entries in `[-1, 1]`.
    pub tau_bar: Vec<f64>,
    pub classes: usize,
    pub gamma_eff: f64,
    /// `class_map[local]` is the global label of local column `local`.
    pub class_map: Vec<usize>,
}

/// Softmax weighting of the best solutions with the relative accuracy
/// threshold `thr = 0.2 min + 0.8 max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightingConfig {
    pub multiplier: f64,
}

impl Default for WeightingConfig {
    fn default() -> Self {
        Self { multiplier: 10.0 }
    }
}

/// Per-solution weights: solutions below the threshold get zero, the rest
/// get a softmax of `multiplier * accuracy` renormalized over the survivors.
/// Weights are non-negative and sum to one.
pub fn weight_solutions(accuracies: &[f64], w: &WeightingConfig) -> Vec<f64> {
    assert!(!accuracies.is_empty(), "need at least one solution");
    let min = accuracies.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = accuracies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let threshold = 0.2 * min + 0.8 * max;
    let peak = w.multiplier * max;
    let mut weights: Vec<f64> = accuracies
        .iter()
        .map(|&a| {
            if a < threshold {
                0.0
            } else {
                (w.multiplier * a - peak).exp()
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    for v in &mut weights {
        *v /= total;
    }
    weights
}

/// Raw per-class scores `sum_n tau_bar[n][c] k(x_n, x)` in local column
/// order.
pub fn qmsvm_scores(model: &MulticlassSvmModel, x: &[f64]) -> Vec<f64> {
    let mut scores = vec![0.0; model.classes];
    for n in 0..model.support_points.rows() {
        let k = gaussian_kernel(model.support_points.row(n), x, model.gamma_eff)
            .expect("support points and query share dimensions");
        for (c, s) in scores.iter_mut().enumerate() {
            *s += model.tau_bar[n * model.classes + c] * k;
        }
    }
    scores
}

/// Argmax of the class scores mapped to the global label; ties go to the
/// lowest class index.
pub fn qmsvm_decision(model: &MulticlassSvmModel, x: &[f64]) -> usize {
    let scores = qmsvm_scores(model, x);
    let mut best = 0usize;
    for c in 1..scores.len() {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    model.class_map[best]
}

/// Densifies labels to the classes actually present: returns the dataset
/// with labels remapped to `0..present` and the local-to-global map.
pub fn densify_labels(data: &Dataset) -> Result<(Dataset, Vec<usize>)> {
    let present = data.present_classes();
    if present.len() == data.class_count() {
        return Ok((data.clone(), present));
    }
    let labels: Vec<usize> = data
        .labels()
        .iter()
        .map(|l| present.binary_search(l).expect("label present"))
        .collect();
    let values: Vec<i64> = present.iter().map(|&c| data.label_value(c)).collect();
    let dense = Dataset::with_label_values(data.features().clone(), labels, present.len(), values)?;
    Ok((dense, present))
}

fn check_capacity(vars: usize, sampler: &dyn Sampler) -> Result<()> {
    if let Some(cap) = sampler.capacity() {
        if vars > cap {
            return Err(Error::Capacity(format!(
                "{vars} binary variables exceed the sampler limit of {cap}"
            )));
        }
    }
    Ok(())
}

/// Trains a multiclass model. Labels are densified first, so a neighborhood
/// missing some global classes trains a smaller model that maps back
/// through `class_map`. Each of the `best_s` lowest-energy reads is scored
/// on the validation set (the training set itself when `validation` is
/// `None`) and the decoded solutions are averaged under
/// [`weight_solutions`].
pub fn train_qmsvm(
    train: &Dataset,
    params: &QmsvmQuboParams,
    prune_ratio: f64,
    sampler: &dyn Sampler,
    cfg: &SamplerConfig,
    weighting: &WeightingConfig,
    validation: Option<&Dataset>,
) -> Result<MulticlassSvmModel> {
    let (dense, class_map) = densify_labels(train)?;
    if dense.class_count() < 2 {
        return Err(Error::InvalidData(
            "multiclass training needs at least two populated classes".into(),
        ));
    }
    cfg.validate()?;
    check_capacity(params.num_vars(dense.len(), dense.class_count()), sampler)?;
    let qubo = build_qmsvm_qubo(&dense, params)?.prune(prune_ratio)?;
    let samples = sampler.sample(&qubo, cfg)?;
    let best = samples.take_best(cfg.best_s);

    let n = dense.len();
    let classes = dense.class_count();
    let decoded: Vec<Vec<f64>> = best
        .iter()
        .map(|s| decode_taus(&s.bits, params.bits, n, classes))
        .collect::<Result<_>>()?;

    // score every candidate on the validation set; global labels there are
    // translated into the local column space
    let (val_features, val_locals): (Matrix, Vec<Option<usize>>) = match validation {
        Some(v) => (
            v.features().clone(),
            v.labels()
                .iter()
                .map(|l| class_map.iter().position(|g| g == l))
                .collect(),
        ),
        None => (
            dense.features().clone(),
            dense.labels().iter().map(|&l| Some(l)).collect(),
        ),
    };
    let kernel_block: Vec<Vec<f64>> = (0..val_features.rows())
        .map(|v| {
            (0..n)
                .map(|t| {
                    gaussian_kernel(val_features.row(v), dense.features().row(t), params.gamma_eff)
                        .expect("validation and training dimensions match")
                })
                .collect()
        })
        .collect();
    let accuracies: Vec<f64> = decoded
        .iter()
        .map(|tau| {
            let mut correct = 0usize;
            let mut total = 0usize;
            for (v, local) in val_locals.iter().enumerate() {
                let Some(local) = local else { continue };
                let mut best_c = 0usize;
                let mut best_score = f64::NEG_INFINITY;
                for c in 0..classes {
                    let score: f64 = (0..n)
                        .map(|t| tau[t * classes + c] * kernel_block[v][t])
                        .sum();
                    if score > best_score {
                        best_score = score;
                        best_c = c;
                    }
                }
                total += 1;
                if best_c == *local {
                    correct += 1;
                }
            }
            if total == 0 {
                0.0
            } else {
                correct as f64 / total as f64
            }
        })
        .collect();

    let weights = weight_solutions(&accuracies, weighting);
    let mut tau_bar = vec![0.0; n * classes];
    for (tau, &w) in decoded.iter().zip(&weights) {
        if w == 0.0 {
            continue;
        }
        for (acc, &t) in tau_bar.iter_mut().zip(tau) {
            *acc += w * t;
        }
    }

    Ok(MulticlassSvmModel {
        support_points: dense.features().clone(),
        tau_bar,
        classes,
        gamma_eff: params.gamma_eff,
        class_map,
    })
}

/// Stratified random subset of size `min(k, N)`: per-class quotas differ by
/// at most one (capped by class availability), deterministic per seed.
pub fn select_global_subset(train: &Dataset, k: usize, seed: u64) -> Result<Dataset> {
    if k < train.class_count() {
        return Err(Error::InvalidParam(format!(
            "subset size {k} is below the class count {}",
            train.class_count()
        )));
    }
    if k >= train.len() {
        return Ok(train.clone());
    }
    let mut rng = seeding::rng(seed);
    use rand::seq::SliceRandom;
    let mut pools: Vec<Vec<usize>> = (0..train.class_count())
        .map(|c| {
            let mut members: Vec<usize> = (0..train.len())
                .filter(|&i| train.labels()[i] == c)
                .collect();
            members.shuffle(&mut rng);
            members
        })
        .collect();

    // deal one quota slot per class round-robin until k are taken
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    while chosen.len() < k {
        let mut progressed = false;
        for pool in &mut pools {
            if chosen.len() == k {
                break;
            }
            if let Some(idx) = pool.pop() {
                chosen.push(idx);
                progressed = true;
            }
        }
        assert!(progressed, "k < N guarantees available samples");
    }
    chosen.sort_unstable();
    train.select(&chosen)
}
