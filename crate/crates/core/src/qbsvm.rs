//! Binary SVM training via QUBO sampling: decoding and averaging the best
//! reads, bias selection, the decision function, and the sliced global
//! ensemble.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{gaussian_kernel, kernel_matrix};
use crate::matrix::Matrix;
use crate::qubo::{build_qbsvm_qubo, decode_alphas, QbsvmQuboParams};
use crate::sampler::{Sampler, SamplerConfig};
use crate::seeding;

/// Sign convention used everywhere: `sign(0) = +1`.
pub fn sign(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Trained binary model: averaged dual coefficients over the full training
/// neighborhood plus a bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvmModel {
    pub support_points: Matrix,
    /// Signed labels, class 0 -> -1 and class 1 -> +1.
    pub labels: Vec<f64>,
    /// Mean decoded coefficients, each in `[0, box_bound]`.
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub gamma_eff: f64,
    pub box_bound: f64,
}

impl BinarySvmModel {
    /// Degenerate model predicting one class regardless of input: zero
    /// coefficients and a unit bias of the right sign.
    pub fn constant(class: usize, support_points: Matrix, gamma_eff: f64) -> Self {
        let n = support_points.rows();
        Self {
            labels: vec![if class == 1 { 1.0 } else { -1.0 }; n],
            alphas: vec![0.0; n],
            bias: if class == 1 { 1.0 } else { -1.0 },
            support_points,
            gamma_eff,
            box_bound: 0.0,
        }
    }
}

/// `sum_n alpha_n y_n k(x_n, x) + b`.
pub fn qbsvm_margin(model: &BinarySvmModel, x: &[f64]) -> f64 {
    let mut acc = model.bias;
    for i in 0..model.support_points.rows() {
        if model.alphas[i] == 0.0 {
            continue;
        }
        let k = gaussian_kernel(model.support_points.row(i), x, model.gamma_eff)
            .expect("support points and query share dimensions");
        acc += model.alphas[i] * model.labels[i] * k;
    }
    acc
}

/// Signed decision `sign(margin)`, with `sign(0) = +1`.
pub fn qbsvm_decision(model: &BinarySvmModel, x: &[f64]) -> i8 {
    sign(qbsvm_margin(model, x))
}

/// Closed-form bias estimate and its degeneracy flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasEstimate {
    pub value: f64,
    /// True when every coefficient sat on the box boundary and the formula
    /// degenerated to 0/0; the value falls back to 0.
    pub degenerate: bool,
}

/// Closed-form bias: coefficients strictly inside the box vote for the bias
/// that makes their margin hit the label exactly.
pub fn compute_bias_eq(
    alphas: &[f64],
    train: &Dataset,
    gamma_eff: f64,
    box_bound: f64,
) -> BiasEstimate {
    let y = signed(train);
    let km = kernel_matrix(train.features(), gamma_eff);
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for n in 0..train.len() {
        let weight = alphas[n] * (box_bound - alphas[n]);
        if weight == 0.0 {
            continue;
        }
        let margin: f64 = (0..train.len())
            .map(|m| alphas[m] * y[m] * km.get(n, m))
            .sum();
        numerator += weight * (y[n] - margin);
        denominator += weight;
    }
    if denominator == 0.0 {
        BiasEstimate {
            value: 0.0,
            degenerate: true,
        }
    } else {
        BiasEstimate {
            value: numerator / denominator,
            degenerate: false,
        }
    }
}

/// Grid post-selection of the bias: every value in `[-10, +10]` at step 0.1
/// is scored on the training set; the most accurate wins, ties broken by
/// smallest magnitude, then by smaller signed value.
pub fn select_bias(alphas: &[f64], train: &Dataset, gamma_eff: f64) -> f64 {
    let y = signed(train);
    let km = kernel_matrix(train.features(), gamma_eff);
    let margins: Vec<f64> = (0..train.len())
        .map(|n| {
            (0..train.len())
                .map(|m| alphas[m] * y[m] * km.get(n, m))
                .sum()
        })
        .collect();

    let mut best_bias = f64::NEG_INFINITY;
    let mut best_correct = usize::MAX;
    for step in 0..=200u32 {
        let bias = (f64::from(step) - 100.0) / 10.0;
        let correct = margins
            .iter()
            .zip(&y)
            .filter(|(&m, &yy)| f64::from(sign(m + bias)) == yy)
            .count();
        let better = best_correct == usize::MAX
            || correct > best_correct
            || (correct == best_correct
                && (bias.abs() < best_bias.abs()
                    || (bias.abs() == best_bias.abs() && bias < best_bias)));
        if better {
            best_correct = correct;
            best_bias = bias;
        }
    }
    best_bias
}

fn signed(train: &Dataset) -> Vec<f64> {
    train
        .labels()
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect()
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

/// Trains a binary model: build the QUBO, sample, average the decoded
/// coefficients of the `best_s` lowest-energy reads, then post-select the
/// bias. The whole training neighborhood is kept as support points.
pub fn train_qbsvm(
    train: &Dataset,
    params: &QbsvmQuboParams,
    prune_ratio: f64,
    sampler: &dyn Sampler,
    cfg: &SamplerConfig,
) -> Result<BinarySvmModel> {
    if train.present_classes().len() != 2 {
        return Err(Error::InvalidData(
            "binary training needs both classes present".into(),
        ));
    }
    cfg.validate()?;
    check_capacity(params.num_vars(train.len()), sampler)?;
    let qubo = build_qbsvm_qubo(train, params)?.prune(prune_ratio)?;
    let samples = sampler.sample(&qubo, cfg)?;
    let best = samples.take_best(cfg.best_s);

    let n = train.len();
    let mut alphas = vec![0.0; n];
    for sample in best {
        let decoded = decode_alphas(&sample.bits, params.base, params.bits, n)?;
        for (acc, a) in alphas.iter_mut().zip(&decoded) {
            *acc += a;
        }
    }
    for a in &mut alphas {
        *a /= best.len() as f64;
    }

    let bias = select_bias(&alphas, train, params.gamma_eff);
    Ok(BinarySvmModel {
        support_points: train.features().clone(),
        labels: signed(train),
        alphas,
        bias,
        gamma_eff: params.gamma_eff,
        box_bound: params.box_bound(),
    })
}

/// Ensemble of per-slice binary models over a disjoint partition of the
/// training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub slices: Vec<BinarySvmModel>,
}

impl EnsembleModel {
    pub fn slice_count(&self) -> usize {
        self.slices.len()
    }
}

/// Mean margin over slices, signed. A single slice reduces to the plain
/// decision function.
pub fn ensemble_decision(model: &EnsembleModel, x: &[f64]) -> i8 {
    let total: f64 = model.slices.iter().map(|m| qbsvm_margin(m, x)).sum();
    sign(total / model.slices.len() as f64)
}

/// Stratified partition into `ceil(N / slice_size)` slices: shuffled
/// per-class lists are dealt round-robin, then rebalanced so every slice
/// except the last holds exactly `slice_size` samples.
pub fn stratified_slices(train: &Dataset, slice_size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if slice_size == 0 {
        return Err(Error::InvalidParam("slice size must be >= 1".into()));
    }
    let n = train.len();
    let count = n.div_ceil(slice_size);
    let mut slices: Vec<Vec<usize>> = vec![Vec::new(); count];
    let mut rng = seeding::rng(seed);
    let mut cursor = 0usize;
    for class in 0..train.class_count() {
        let mut members: Vec<usize> = (0..n).filter(|&i| train.labels()[i] == class).collect();
        use rand::seq::SliceRandom;
        members.shuffle(&mut rng);
        for idx in members {
            slices[cursor % count].push(idx);
            cursor += 1;
        }
    }
    // move surplus out of the final slice until the leading slices are full
    if count > 1 {
        let mut receiver = 0usize;
        while slices[count - 1].len() > n - (count - 1) * slice_size {
            while slices[receiver].len() >= slice_size {
                receiver += 1;
            }
            let moved = slices[count - 1].pop().expect("surplus present");
            slices[receiver].push(moved);
        }
    }
    Ok(slices)
}

/// Trains one model per stratified slice. A slice degenerating to a single
/// class becomes a constant classifier for that class instead of an error,
/// keeping the ensemble total.
pub fn train_qbsvm_ensemble(
    train: &Dataset,
    params: &QbsvmQuboParams,
    prune_ratio: f64,
    sampler: &dyn Sampler,
    cfg: &SamplerConfig,
    slice_size: usize,
    seed: u64,
) -> Result<EnsembleModel> {
    if train.present_classes().len() != 2 {
        return Err(Error::InvalidData(
            "binary training needs both classes present".into(),
        ));
    }
    let slices = stratified_slices(train, slice_size, seed)?;
    let mut models = Vec::with_capacity(slices.len());
    for (l, slice) in slices.iter().enumerate() {
        let sub = train.select(slice)?;
        let present = sub.present_classes();
        let model = if present.len() == 1 {
            BinarySvmModel::constant(present[0], sub.features().clone(), params.gamma_eff)
        } else {
            let mut slice_cfg = *cfg;
            slice_cfg.seed = seeding::derive(cfg.seed, l as u64);
            train_qbsvm(&sub, params, prune_ratio, sampler, &slice_cfg)?
        };
        models.push(model);
    }
    Ok(EnsembleModel { slices: models })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_blobs, BlobSpec};
    use crate::sampler::ExhaustiveSolver;

    fn dataset(rows: &[Vec<f64>], labels: &[usize]) -> Dataset {
        Dataset::new(Matrix::from_rows(rows).unwrap(), labels.to_vec(), 2).unwrap()
    }

    fn params(gamma: f64) -> QbsvmQuboParams {
        QbsvmQuboParams {
            base: 2,
            bits: 2,
            penalty: 1.0,
            gamma_eff: gamma,
        }
    }

    fn exhaustive_cfg(seed: u64, s: usize) -> SamplerConfig {
        SamplerConfig {
            best_s: s,
            ..SamplerConfig::new(seed)
        }
    }

    #[test]
    fn sign_of_zero_is_positive() {
        assert_eq!(sign(0.0), 1);
        assert_eq!(sign(-0.0), 1);
        assert_eq!(sign(-1e-300), -1);
    }

    #[test]
    fn two_point_training_is_perfect() {
        let ds = dataset(&[vec![0.0, 0.0], vec![2.0, 0.0]], &[1, 0]);
        let model = train_qbsvm(
            &ds,
            &params(1.0),
            1000.0,
            &ExhaustiveSolver::default(),
            &exhaustive_cfg(1, 1),
        )
        .unwrap();
        assert_eq!(qbsvm_decision(&model, ds.features().row(0)), 1);
        assert_eq!(qbsvm_decision(&model, ds.features().row(1)), -1);
    }

    #[test]
    fn s_equal_one_is_the_global_optimum_decode() {
        let ds = dataset(&[vec![0.0], vec![1.5], vec![-0.5], vec![2.0]], &[1, 0, 1, 0]);
        let p = params(1.0);
        let solver = ExhaustiveSolver::default();
        let model = train_qbsvm(&ds, &p, 1000.0, &solver, &exhaustive_cfg(1, 1)).unwrap();
        let qubo = build_qbsvm_qubo(&ds, &p).unwrap();
        let exact = solver.sample(&qubo, &exhaustive_cfg(1, 1)).unwrap();
        let expected = decode_alphas(&exact.best().bits, p.base, p.bits, ds.len()).unwrap();
        assert_eq!(model.alphas, expected);
    }

    #[test]
    fn averaging_is_plain_arithmetic_mean() {
        // averaging duplicated decodes changes nothing
        let a = [1.0, 3.0];
        let duplicated = [[1.0, 3.0], [1.0, 3.0], [1.0, 3.0]];
        let mean: Vec<f64> = (0..2)
            .map(|i| duplicated.iter().map(|d| d[i]).sum::<f64>() / 3.0)
            .collect();
        assert_eq!(mean, a.to_vec());
    }

    #[test]
    fn decision_examples_with_zero_coefficients() {
        let mut model = BinarySvmModel::constant(1, Matrix::from_rows(&[vec![0.0]]).unwrap(), 1.0);
        model.bias = 0.5;
        assert_eq!(qbsvm_decision(&model, &[9.0]), 1);
        model.bias = -0.5;
        assert_eq!(qbsvm_decision(&model, &[9.0]), -1);
    }

    #[test]
    fn single_support_point_margin() {
        let model = BinarySvmModel {
            support_points: Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap(),
            labels: vec![1.0],
            alphas: vec![1.0],
            bias: 0.0,
            gamma_eff: 1.0,
            box_bound: 3.0,
        };
        assert_eq!(qbsvm_margin(&model, &[1.0, 2.0]), 1.0);
        assert_eq!(qbsvm_decision(&model, &[1.0, 2.0]), 1);
    }

    #[test]
    fn bias_eq_degenerate_on_boundary() {
        let ds = dataset(&[vec![0.0], vec![1.0]], &[1, 0]);
        // alphas at 0 and at the bound A=3: every weight vanishes
        let est = compute_bias_eq(&[0.0, 3.0], &ds, 1.0, 3.0);
        assert!(est.degenerate);
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn bias_eq_single_point() {
        let ds = dataset(&[vec![0.0]], &[1]);
        let est = compute_bias_eq(&[1.0], &ds, 1.0, 3.0);
        assert!(!est.degenerate);
        assert_eq!(est.value, 0.0); // y - alpha*k(x,x) = 1 - 1
    }

    #[test]
    fn bias_eq_symmetric_pair_is_zero() {
        let ds = dataset(&[vec![1.0], vec![1.0]], &[1, 0]);
        let est = compute_bias_eq(&[1.0, 1.0], &ds, 1.0, 3.0);
        assert!(!est.degenerate);
        assert!(est.value.abs() < 1e-12);
    }

    #[test]
    fn select_bias_all_positive_labels() {
        let ds = Dataset::new(
            Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
            vec![1, 1],
            2,
        )
        .unwrap();
        assert_eq!(select_bias(&[0.0, 0.0], &ds, 1.0), 0.0);
    }

    #[test]
    fn select_bias_all_negative_labels() {
        let ds = Dataset::new(
            Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
            vec![0, 0],
            2,
        )
        .unwrap();
        // sign(0) = +1, so b = 0 misclassifies; the smallest working
        // magnitude on the grid is -0.1
        assert_eq!(select_bias(&[0.0, 0.0], &ds, 1.0), -0.1);
    }

    #[test]
    fn select_bias_lands_on_grid_and_maximizes() {
        let ds = make_blobs(
            &[
                BlobSpec {
                    center: vec![0.0, 0.0],
                    sigma: 0.8,
                    count: 10,
                },
                BlobSpec {
                    center: vec![3.0, 0.0],
                    sigma: 0.8,
                    count: 10,
                },
            ],
            21,
        )
        .unwrap();
        let alphas = vec![0.7; 20];
        let chosen = select_bias(&alphas, &ds, 1.0);
        let on_grid = (chosen * 10.0).round() / 10.0;
        assert_eq!(chosen, on_grid);
        assert!((-10.0..=10.0).contains(&chosen));

        let y = signed(&ds);
        let accuracy = |bias: f64| {
            (0..ds.len())
                .filter(|&n| {
                    let margin: f64 = (0..ds.len())
                        .map(|m| {
                            alphas[m]
                                * y[m]
                                * gaussian_kernel(ds.features().row(m), ds.features().row(n), 1.0)
                                    .unwrap()
                        })
                        .sum();
                    f64::from(sign(margin + bias)) == y[n]
                })
                .count()
        };
        let best_grid = (0..=200)
            .map(|j| accuracy((f64::from(j) - 100.0) / 10.0))
            .max()
            .unwrap();
        assert_eq!(accuracy(chosen), best_grid);
    }

    #[test]
    fn slices_follow_target_sizes() {
        let ds = make_blobs(
            &[
                BlobSpec {
                    center: vec![0.0],
                    sigma: 1.0,
                    count: 80,
                },
                BlobSpec {
                    center: vec![5.0],
                    sigma: 1.0,
                    count: 80,
                },
            ],
            1,
        )
        .unwrap();
        let slices = stratified_slices(&ds, 80, 7).unwrap();
        assert_eq!(slices.len(), 2);
        assert_eq!(slices[0].len(), 80);
        assert_eq!(slices[1].len(), 80);

        let sizes: Vec<usize> = stratified_slices(&ds, 60, 7)
            .unwrap()
            .iter()
            .map(Vec::len)
            .collect();
        assert_eq!(sizes, vec![60, 60, 40]);

        // disjoint partition
        let mut all: Vec<usize> = stratified_slices(&ds, 60, 7).unwrap().concat();
        all.sort_unstable();
        assert_eq!(all, (0..160).collect::<Vec<_>>());
    }

    #[test]
    fn slices_match_reported_large_split() {
        let ds = Dataset::new(
            Matrix::new(450, 1, vec![0.0; 450]).unwrap(),
            (0..450).map(|i| i % 2).collect(),
            2,
        )
        .unwrap();
        let sizes: Vec<usize> = stratified_slices(&ds, 80, 3)
            .unwrap()
            .iter()
            .map(Vec::len)
            .collect();
        assert_eq!(sizes, vec![80, 80, 80, 80, 80, 50]);
    }

    #[test]
    fn single_slice_ensemble_equals_plain_model() {
        let ds = dataset(&[vec![0.0], vec![3.0], vec![0.2], vec![2.8]], &[1, 0, 1, 0]);
        let p = params(1.0);
        let solver = ExhaustiveSolver::default();
        let cfg = exhaustive_cfg(5, 10);
        let ensemble =
            train_qbsvm_ensemble(&ds, &p, 1000.0, &solver, &cfg, 10, 5).unwrap();
        assert_eq!(ensemble.slice_count(), 1);
        for x in [[0.1], [2.9], [-4.0], [9.0]] {
            assert_eq!(
                ensemble_decision(&ensemble, &x),
                qbsvm_decision(&ensemble.slices[0], &x)
            );
        }
    }

    #[test]
    fn opposite_constant_slices_tie_to_positive() {
        let points = Matrix::from_rows(&[vec![0.0]]).unwrap();
        let model = EnsembleModel {
            slices: vec![
                BinarySvmModel::constant(1, points.clone(), 1.0),
                BinarySvmModel::constant(0, points, 1.0),
            ],
        };
        assert_eq!(ensemble_decision(&model, &[5.0]), 1);
    }

    #[test]
    fn agreeing_slices_win() {
        let points = Matrix::from_rows(&[vec![0.0]]).unwrap();
        let model = EnsembleModel {
            slices: vec![
                BinarySvmModel::constant(0, points.clone(), 1.0),
                BinarySvmModel::constant(0, points, 1.0),
            ],
        };
        assert_eq!(ensemble_decision(&model, &[5.0]), -1);
    }

    #[test]
    fn alphas_stay_in_box() {
        let ds = make_blobs(
            &[
                BlobSpec {
                    center: vec![0.0],
                    sigma: 0.5,
                    count: 4,
                },
                BlobSpec {
                    center: vec![4.0],
                    sigma: 0.5,
                    count: 4,
                },
            ],
            13,
        )
        .unwrap();
        let p = params(1.0);
        let model = train_qbsvm(
            &ds,
            &p,
            1000.0,
            &ExhaustiveSolver::default(),
            &exhaustive_cfg(2, 50),
        )
        .unwrap();
        for &a in &model.alphas {
            assert!(a >= 0.0 && a <= p.box_bound());
        }
    }

    #[test]
    fn separable_blobs_classified_perfectly() {
        let ds = make_blobs(
            &[
                BlobSpec {
                    center: vec![0.0, 0.0],
                    sigma: 0.3,
                    count: 4,
                },
                BlobSpec {
                    center: vec![4.0, 0.0],
                    sigma: 0.3,
                    count: 4,
                },
            ],
            11,
        )
        .unwrap();
        let model = train_qbsvm(
            &ds,
            &params(1.0),
            1000.0,
            &ExhaustiveSolver::default(),
            &exhaustive_cfg(3, 1),
        )
        .unwrap();
        for i in 0..ds.len() {
            let expected = if ds.labels()[i] == 1 { 1 } else { -1 };
            assert_eq!(qbsvm_decision(&model, ds.features().row(i)), expected);
        }
    }

    #[test]
    fn grid_bias_never_loses_to_closed_form() {
        let mut rng = seeding::rng(77);
        use rand::Rng;
        for _ in 0..30 {
            let n = rng.random_range(3..7);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
                .collect();
            let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
            let ds = dataset(&rows, &labels);
            let p = params(1.0);
            let model = train_qbsvm(
                &ds,
                &p,
                1000.0,
                &ExhaustiveSolver::default(),
                &exhaustive_cfg(rng.random(), 5),
            )
            .unwrap();
            let closed = compute_bias_eq(&model.alphas, &ds, p.gamma_eff, p.box_bound());
            let y = signed(&ds);
            let km = kernel_matrix(ds.features(), p.gamma_eff);
            let accuracy = |bias: f64| {
                (0..n)
                    .filter(|&a| {
                        let margin: f64 =
                            (0..n).map(|m| model.alphas[m] * y[m] * km.get(a, m)).sum();
                        f64::from(sign(margin + bias)) == y[a]
                    })
                    .count()
            };
            assert!(accuracy(model.bias) >= accuracy(closed.value));
        }
    }
}
