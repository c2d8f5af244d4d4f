//! QUBO formulation of the single-step (Crammer-Singer style) multiclass
//! SVM.
//!
//! Each of the `N * C` model variables is squeezed into `[-1, 1]` with `K`
//! bits, `tau_nc = -1 + 2/(2^K - 1) * sum_k 2^k a_{nCK+cK+k}`. The QUBO
//! matrix folds in the objective, the per-sample balance constraint
//! `sum_c tau_nc = 0` as a squared penalty, and the sign constraint
//! `tau_nc <= 0` for `c != y_n` as a linear penalty, both weighted by
//! `penalty`.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::kernel_matrix;
use crate::qubo::QuboMatrix;

/// Parameters of the multiclass SVM QUBO encoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QmsvmQuboParams {
    /// Bits per model variable `K` (>= 1).
    pub bits: u32,
    /// Constraint penalty multiplier `mu`.
    pub penalty: f64,
    /// Regularization weight `beta` of the label-alignment term.
    pub regularization: f64,
    /// Resolved positive kernel coefficient.
    pub gamma_eff: f64,
}

impl QmsvmQuboParams {
    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 || self.bits > 32 {
            return Err(Error::InvalidParam(format!(
                "bits per variable must be in 1..=32, got {}",
                self.bits
            )));
        }
        if self.gamma_eff <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "gamma_eff must be positive, got {}",
                self.gamma_eff
            )));
        }
        Ok(())
    }

    /// Number of binary variables for `n` samples and `c` classes.
    pub fn num_vars(&self, n: usize, c: usize) -> usize {
        n * c * self.bits as usize
    }
}

/// Builds the multiclass SVM QUBO over `N * C * K` variables with the
/// layout `index(n, c, k) = n*C*K + c*K + k`.
pub fn build_qmsvm_qubo(train: &Dataset, p: &QmsvmQuboParams) -> Result<QuboMatrix> {
    p.validate()?;
    let classes = train.class_count();
    if classes < 2 || train.present_classes().len() < 2 {
        return Err(Error::InvalidData(
            "multiclass QUBO needs at least two populated classes".into(),
        ));
    }
    let n = train.len();
    let kbits = p.bits as usize;
    let dim = p.num_vars(n, classes);
    let km = kernel_matrix(train.features(), p.gamma_eff);
    let labels = train.labels();

    // kernel row sums appear in every diagonal entry
    let row_sums: Vec<f64> = (0..n).map(|a| (0..n).map(|b| km.get(a, b)).sum()).collect();

    let den = ((1u64 << p.bits) - 1) as f64;
    let den2 = den * den;
    let two_pow: Vec<f64> = (0..kbits).map(|k| (1u64 << k) as f64).collect();
    let c_count = classes as f64;

    let mut q = QuboMatrix::zeros(dim)?;
    for i in 0..dim {
        let n1 = i / (classes * kbits);
        let c1 = (i / kbits) % classes;
        let k1 = i % kbits;

        let aligned = if c1 == labels[n1] { 1.0 } else { 0.0 };
        let linear = 2.0 * two_pow[k1] / den
            * (-row_sums[n1] - aligned * (p.regularization + p.penalty)
                - 2.0 * c_count * p.penalty
                + p.penalty);
        let quad_kernel = 2.0 * two_pow[k1] * two_pow[k1] / den2 * km.get(n1, n1);
        let quad_balance = 4.0 * two_pow[k1] * two_pow[k1] * p.penalty / den2;
        q.set(i, i, linear + quad_kernel + quad_balance);

        for j in (i + 1)..dim {
            let n2 = j / (classes * kbits);
            let c2 = (j / kbits) % classes;
            let k2 = j % kbits;
            let mut v = 0.0;
            if c1 == c2 {
                // both orders of the double sum fold into the upper entry
                v += 4.0 * two_pow[k1] * two_pow[k2] / den2 * km.get(n1, n2);
            }
            if n1 == n2 {
                v += 8.0 * two_pow[k1] * two_pow[k2] * p.penalty / den2;
            }
            if v != 0.0 {
                q.set(i, j, v);
            }
        }
    }
    Ok(q)
}

/// Decodes a sampler assignment into the `N x C` model variables
/// (row-major), each in `[-1, 1]`.
pub fn decode_taus(bits: &[u8], bits_per_var: u32, n: usize, c: usize) -> Result<Vec<f64>> {
    let kbits = bits_per_var as usize;
    if bits.len() != n * c * kbits {
        return Err(Error::DimensionMismatch(format!(
            "{} bits cannot encode {n}x{c} variables of {kbits} bits",
            bits.len()
        )));
    }
    let den = ((1u64 << bits_per_var) - 1) as f64;
    let mut taus = Vec::with_capacity(n * c);
    for chunk in bits.chunks_exact(kbits) {
        let mut acc = 0.0;
        for (k, &bit) in chunk.iter().enumerate() {
            if bit != 0 {
                acc += (1u64 << k) as f64;
            }
        }
        taus.push(-1.0 + 2.0 / den * acc);
    }
    Ok(taus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::qubo::all_assignments;
    use crate::seeding;
    use rand::Rng;

    /// Crammer-Singer objective plus both mu-penalties, written directly
    /// from the optimization problem: `E(tau) + mu * sum_n (sum_c tau_nc)^2
    /// + mu * sum_n sum_{c != y_n} tau_nc`.
    fn penalized_objective(
        taus: &[f64],
        labels: &[usize],
        km: &Matrix,
        classes: usize,
        penalty: f64,
        regularization: f64,
    ) -> f64 {
        let n = labels.len();
        let tau = |a: usize, c: usize| taus[a * classes + c];
        let mut quad = 0.0;
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..classes).map(|c| tau(a, c) * tau(b, c)).sum();
                quad += km.get(a, b) * dot;
            }
        }
        let align: f64 = (0..n).map(|a| tau(a, labels[a])).sum();
        let balance: f64 = (0..n)
            .map(|a| {
                let s: f64 = (0..classes).map(|c| tau(a, c)).sum();
                s * s
            })
            .sum();
        let sign: f64 = (0..n)
            .map(|a| {
                (0..classes)
                    .filter(|&c| c != labels[a])
                    .map(|c| tau(a, c))
                    .sum::<f64>()
            })
            .sum();
        0.5 * quad - regularization * align + penalty * balance + penalty * sign
    }

    #[test]
    fn variable_count_layout() {
        let ds = Dataset::new(
            Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap(),
            vec![0, 1, 2, 0],
            3,
        )
        .unwrap();
        let p = QmsvmQuboParams {
            bits: 2,
            penalty: 1.0,
            regularization: 1.0,
            gamma_eff: 1.0,
        };
        let q = build_qmsvm_qubo(&ds, &p).unwrap();
        assert_eq!(q.dim(), 24);
    }

    #[test]
    fn rejects_single_class_input() {
        let ds = Dataset::new(Matrix::new(3, 1, vec![0.0, 1.0, 2.0]).unwrap(), vec![1, 1, 1], 3)
            .unwrap();
        let p = QmsvmQuboParams {
            bits: 1,
            penalty: 1.0,
            regularization: 1.0,
            gamma_eff: 1.0,
        };
        assert!(build_qmsvm_qubo(&ds, &p).is_err());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_taus(&[0, 0], 2, 1, 1).unwrap(), vec![-1.0]);
        assert_eq!(decode_taus(&[1, 1], 2, 1, 1).unwrap(), vec![1.0]);
        let v = decode_taus(&[1, 0], 2, 1, 1).unwrap();
        assert!((v[0] - (-1.0 / 3.0)).abs() < 1e-15);
        assert!(decode_taus(&[1, 0, 1], 2, 1, 2).is_err());
    }

    #[test]
    fn decode_bounds_exhaustive() {
        for bits in all_assignments(6) {
            for t in decode_taus(&bits, 3, 1, 2).unwrap() {
                assert!((-1.0..=1.0).contains(&t));
            }
        }
    }

    #[test]
    fn uniform_kernel_reduces_to_pure_structure() {
        // coincident points -> every kernel entry is 1; mu = beta = 0
        let ds = Dataset::new(Matrix::new(2, 1, vec![3.0, 3.0]).unwrap(), vec![0, 1], 2).unwrap();
        let p = QmsvmQuboParams {
            bits: 2,
            penalty: 0.0,
            regularization: 0.0,
            gamma_eff: 1.0,
        };
        let q = build_qmsvm_qubo(&ds, &p).unwrap();
        let n = 2.0;
        let den = 3.0;
        for i in 0..q.dim() {
            let k1 = i % 2;
            let pow = (1u64 << k1) as f64;
            let expected = 2.0 * pow / den * (-n) + 2.0 * pow * pow / (den * den);
            assert!((q.get(i, i) - expected).abs() < 1e-12, "diag {i}");
            for j in (i + 1)..q.dim() {
                let c1 = (i / 2) % 2;
                let c2 = (j / 2) % 2;
                let k2 = j % 2;
                let expected = if c1 == c2 {
                    4.0 * pow * ((1u64 << k2) as f64) / (den * den)
                } else {
                    0.0
                };
                assert!((q.get(i, j) - expected).abs() < 1e-12, "entry ({i}, {j})");
            }
        }
    }

    #[test]
    fn energy_matches_penalized_objective_up_to_constant() {
        let mut rng = seeding::rng(23);
        for case in 0..20 {
            let n = 2;
            let classes = 2 + case % 2;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random_range(-2.0..2.0)])
                .collect();
            let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
            let ds = Dataset::new(Matrix::from_rows(&rows).unwrap(), labels.clone(), classes)
                .unwrap();
            let p = QmsvmQuboParams {
                bits: 1,
                penalty: rng.random_range(0.0..2.0),
                regularization: rng.random_range(0.0..2.0),
                gamma_eff: 0.6,
            };
            let q = build_qmsvm_qubo(&ds, &p).unwrap();
            let km = kernel_matrix(ds.features(), p.gamma_eff);

            let mut diffs = Vec::new();
            for bits in all_assignments(q.dim()) {
                let taus = decode_taus(&bits, p.bits, n, classes).unwrap();
                let obj =
                    penalized_objective(&taus, &labels, &km, classes, p.penalty, p.regularization);
                diffs.push(q.energy(&bits).unwrap() - obj);
            }
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / diffs.len() as f64;
            assert!(var < 1e-9, "case {case}: objective mismatch, variance {var}");
        }
    }
}
