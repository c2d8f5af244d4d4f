//! QUBO formulation of the binary SVM dual.
//!
//! Each dual coefficient is encoded with `K` bits in base `B`,
//! `alpha_n = sum_k B^k a_{Kn+k}`, so the box constraint becomes
//! `0 <= alpha_n <= A` with `A = sum_k B^k`. The equality constraint
//! `sum_n alpha_n y_n = 0` enters the kernel term as the `+penalty` shift.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::kernel_matrix;
use crate::qubo::QuboMatrix;

/// Parameters of the binary SVM QUBO encoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QbsvmQuboParams {
    /// Encoding base `B` (>= 2).
    pub base: u32,
    /// Bits per dual coefficient `K` (>= 1).
    pub bits: u32,
    /// Multiplier `xi` of the balance-constraint penalty (>= 0).
    pub penalty: f64,
    /// Resolved positive kernel coefficient.
    pub gamma_eff: f64,
}

impl QbsvmQuboParams {
    pub fn validate(&self) -> Result<()> {
        if self.base < 2 {
            return Err(Error::InvalidParam(format!(
                "encoding base must be >= 2, got {}",
                self.base
            )));
        }
        if self.bits == 0 || self.bits > 32 {
            return Err(Error::InvalidParam(format!(
                "bits per coefficient must be in 1..=32, got {}",
                self.bits
            )));
        }
        if self.penalty < 0.0 {
            return Err(Error::InvalidParam(format!(
                "constraint penalty must be non-negative, got {}",
                self.penalty
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

    /// Upper bound `A = sum_{k<K} B^k` of each decoded coefficient.
    pub fn box_bound(&self) -> f64 {
        (0..self.bits).map(|k| f64::from(self.base).powi(k as i32)).sum()
    }

    /// Number of binary variables for `n` training samples.
    pub fn num_vars(&self, n: usize) -> usize {
        n * self.bits as usize
    }
}

/// Signed labels for a two-class dataset: class 0 -> -1, class 1 -> +1.
pub(crate) fn signed_labels(train: &Dataset) -> Result<Vec<f64>> {
    if train.class_count() != 2 {
        return Err(Error::InvalidData(format!(
            "binary SVM needs a two-class dataset, got {} classes",
            train.class_count()
        )));
    }
    Ok(train
        .labels()
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect())
}

/// Builds the binary SVM QUBO matrix over `N * K` variables.
///
/// The full symmetric coefficient for variable pair `(Kn+k, Km+j)` is
/// `B^(k+j)/2 * y_n y_m (kernel(n,m) + penalty) - delta * B^k`; symmetric
/// off-diagonal pairs are folded into the upper triangle by summing both
/// orders.
pub fn build_qbsvm_qubo(train: &Dataset, p: &QbsvmQuboParams) -> Result<QuboMatrix> {
    p.validate()?;
    let y = signed_labels(train)?;
    let n = train.len();
    let kbits = p.bits as usize;
    let dim = p.num_vars(n);
    let km = kernel_matrix(train.features(), p.gamma_eff);
    let pow: Vec<f64> = (0..kbits).map(|k| f64::from(p.base).powi(k as i32)).collect();

    let mut q = QuboMatrix::zeros(dim)?;
    for i in 0..dim {
        let (sn, sk) = (i / kbits, i % kbits);
        q.set(
            i,
            i,
            0.5 * pow[sk] * pow[sk] * (km.get(sn, sn) + p.penalty) - pow[sk],
        );
        for j in (i + 1)..dim {
            let (sm, sj) = (j / kbits, j % kbits);
            // both (n,m) orders of the double sum land on the upper entry
            q.set(
                i,
                j,
                pow[sk] * pow[sj] * y[sn] * y[sm] * (km.get(sn, sm) + p.penalty),
            );
        }
    }
    Ok(q)
}

/// Decodes a sampler assignment into the `N` dual coefficients.
pub fn decode_alphas(bits: &[u8], base: u32, bits_per_coeff: u32, n: usize) -> Result<Vec<f64>> {
    let kbits = bits_per_coeff as usize;
    if bits.len() != n * kbits {
        return Err(Error::DimensionMismatch(format!(
            "{} bits cannot encode {n} coefficients of {kbits} bits",
            bits.len()
        )));
    }
    let mut alphas = Vec::with_capacity(n);
    for chunk in bits.chunks_exact(kbits) {
        let mut a = 0.0;
        for (k, &bit) in chunk.iter().enumerate() {
            if bit != 0 {
                a += f64::from(base).powi(k as i32);
            }
        }
        alphas.push(a);
    }
    Ok(alphas)
}
