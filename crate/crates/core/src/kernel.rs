//! Gaussian kernel evaluation and the median-distance width heuristic.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{dist, sq_dist, Matrix};

/// Sentinel gamma value requesting the median-distance heuristic.
pub const MEDIAN_GAMMA: f64 = -0.5;

/// Gaussian kernel width configuration.
///
/// `gamma` is either a positive coefficient used directly in
/// `exp(-gamma * ||x - y||^2)`, or exactly `-0.5`, in which case the width is
/// derived per neighborhood from the median pairwise distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub gamma: f64,
}

impl KernelConfig {
    pub fn fixed(gamma: f64) -> Result<Self> {
        if gamma <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "kernel gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    /// Median-distance heuristic sentinel.
    pub fn median() -> Self {
        Self { gamma: MEDIAN_GAMMA }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma > 0.0 || self.gamma == MEDIAN_GAMMA {
            Ok(())
        } else {
            Err(Error::InvalidParam(format!(
                "kernel gamma must be positive or exactly {MEDIAN_GAMMA}, got {}",
                self.gamma
            )))
        }
    }

    pub fn is_median(&self) -> bool {
        self.gamma == MEDIAN_GAMMA
    }
}

/// `exp(-gamma_eff * ||x - y||^2)`; always in `(0, 1]`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], gamma_eff: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "kernel arguments have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    debug_assert!(gamma_eff > 0.0);
    Ok((-gamma_eff * sq_dist(x, y)).exp())
}

/// Resolves a kernel config against a neighborhood.
///
/// A fixed gamma passes through. The median sentinel sets the width to the
/// median pairwise Euclidean distance sigma over the neighborhood (each
/// unordered pair once, no self-pairs; even counts average the two central
/// values) and returns `1 / sigma^2`. If every point coincides the median is
/// zero and the fallback is `1.0`.
pub fn resolve_gamma(cfg: &KernelConfig, neighborhood: &Dataset) -> Result<f64> {
    cfg.validate()?;
    if !cfg.is_median() {
        return Ok(cfg.gamma);
    }
    let n = neighborhood.len();
    if n < 2 {
        return Err(Error::InvalidData(
            "median kernel width needs at least two points".into(),
        ));
    }
    let features = neighborhood.features();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(dist(features.row(i), features.row(j)));
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let mid = dists.len() / 2;
    let sigma = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    if sigma == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 / (sigma * sigma))
}

/// Full `N x N` Gaussian kernel matrix; symmetric with unit diagonal.
pub fn kernel_matrix(features: &Matrix, gamma_eff: f64) -> Matrix {
    let n = features.rows();
    let mut km = Matrix::zeros(n, n);
    for i in 0..n {
        km.set(i, i, 1.0);
        for j in (i + 1)..n {
            let v = (-gamma_eff * sq_dist(features.row(i), features.row(j))).exp();
            km.set(i, j, v);
            km.set(j, i, v);
        }
    }
    km
}
