//! QUBO problem representation: upper-triangular matrix storage, energy
//! evaluation, the spin-model conversion, coefficient pruning, and the two
//! SVM-specific problem builders ([`build_qbsvm_qubo`], [`build_qmsvm_qubo`]).

mod binary;
mod multiclass;

pub use binary::{build_qbsvm_qubo, decode_alphas, QbsvmQuboParams};
pub use multiclass::{build_qmsvm_qubo, decode_taus, QmsvmQuboParams};

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Upper-triangular QUBO coefficient matrix.
///
/// The quadratic form is `sum_{i<=j} Q_ij x_i x_j` over bit vectors `x`;
/// diagonal entries double as linear coefficients since `x_i^2 = x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboMatrix {
    dim: usize,
    // packed rows: entry (i, j), i <= j, lives at i*dim - i*(i-1)/2 + (j-i)
    entries: Vec<f64>,
}

impl QuboMatrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam("QUBO dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            entries: vec![0.0; dim * (dim + 1) / 2],
        })
    }

    /// Builds from explicit upper-triangular coefficients.
    pub fn from_entries(dim: usize, coeffs: &[(usize, usize, f64)]) -> Result<Self> {
        let mut q = Self::zeros(dim)?;
        for &(i, j, v) in coeffs {
            if i > j || j >= dim {
                return Err(Error::InvalidParam(format!(
                    "entry ({i}, {j}) outside the upper triangle of a dim-{dim} matrix"
                )));
            }
            q.add(i, j, v);
        }
        Ok(q)
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j && j < self.dim);
        i * (2 * self.dim - i + 1) / 2 + (j - i)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coefficient at `(i, j)`; arguments may come in either order.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.entries[self.idx(a, b)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let k = self.idx(a, b);
        self.entries[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let k = self.idx(a, b);
        self.entries[k] += v;
    }

    /// Nonzero upper-triangular entries in row-major order.
    pub fn iter_nonzero(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim)
            .flat_map(move |i| (i..self.dim).map(move |j| (i, j)))
            .map(move |(i, j)| (i, j, self.entries[self.idx(i, j)]))
            .filter(|&(_, _, v)| v != 0.0)
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sum_{i<=j} Q_ij x_i x_j` for a bit assignment.
    pub fn energy(&self, bits: &[u8]) -> Result<f64> {
        if bits.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "assignment of length {} for a dim-{} QUBO",
                bits.len(),
                self.dim
            )));
        }
        let mut e = 0.0;
        for i in 0..self.dim {
            if bits[i] == 0 {
                continue;
            }
            let row = self.idx(i, i);
            e += self.entries[row];
            for (offset, &bit) in bits[i + 1..].iter().enumerate() {
                if bit != 0 {
                    e += self.entries[row + 1 + offset];
                }
            }
        }
        Ok(e)
    }

    /// Zeros every off-diagonal coefficient smaller in magnitude than
    /// `max_abs / max_min_ratio`. The diagonal is never pruned.
    pub fn prune(&self, max_min_ratio: f64) -> Result<Self> {
        if max_min_ratio <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "max/min ratio must be positive, got {max_min_ratio}"
            )));
        }
        let threshold = self.max_abs() / max_min_ratio;
        let mut out = self.clone();
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let k = out.idx(i, j);
                if out.entries[k].abs() < threshold {
                    out.entries[k] = 0.0;
                }
            }
        }
        Ok(out)
    }

    /// Equivalent spin model under `x_i = (z_i + 1) / 2`:
    /// `energy(x) = ising_energy(z) + offset` for every assignment.
    pub fn to_ising(&self) -> IsingModel {
        let mut h = vec![0.0; self.dim];
        let mut couplings = Vec::new();
        let mut offset = 0.0;
        for i in 0..self.dim {
            let d = self.entries[self.idx(i, i)];
            h[i] += d / 2.0;
            offset += d / 2.0;
            for j in (i + 1)..self.dim {
                let q = self.entries[self.idx(i, j)];
                if q == 0.0 {
                    continue;
                }
                h[i] += q / 4.0;
                h[j] += q / 4.0;
                couplings.push((i, j, q / 4.0));
                offset += q / 4.0;
            }
        }
        IsingModel {
            h,
            couplings,
            offset,
        }
    }

    /// Writes the debug dump format: a `dim N` header, then one
    /// `i j value` line per nonzero upper-triangular entry.
    pub fn write_text<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "dim {}", self.dim)?;
        for (i, j, v) in self.iter_nonzero() {
            writeln!(out, "{i} {j} {v}")?;
        }
        Ok(())
    }

    /// Parses the dump format produced by [`Self::write_text`].
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: "empty QUBO dump".into(),
            })?
            .1?;
        let dim: usize = header
            .strip_prefix("dim ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("expected `dim N` header, got {header:?}"),
            })?;
        let mut q = Self::zeros(dim)?;
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|t| t.parse().ok()).ok_or(Error::Parse {
                    line: idx + 1,
                    msg: format!("malformed entry line {line:?}"),
                })
            };
            let i = parse(parts.next())? as usize;
            let j = parse(parts.next())? as usize;
            let v = parse(parts.next())?;
            if i > j || j >= dim {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("entry ({i}, {j}) outside the upper triangle"),
                });
            }
            q.set(i, j, v);
        }
        Ok(q)
    }
}

/// Spin model with linear terms `h`, couplings on `i < j`, and the constant
/// offset dropped by the QUBO form.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    pub h: Vec<f64>,
    pub couplings: Vec<(usize, usize, f64)>,
    pub offset: f64,
}

impl IsingModel {
    /// `sum_i h_i z_i + sum_{i<j} J_ij z_i z_j` (offset excluded).
    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.h.len() {
            return Err(Error::DimensionMismatch(format!(
                "spin vector of length {} for a {}-spin model",
                spins.len(),
                self.h.len()
            )));
        }
        if let Some(&bad) = spins.iter().find(|&&z| z != 1 && z != -1) {
            return Err(Error::InvalidData(format!("spin value {bad} is not +/-1")));
        }
        let mut e = 0.0;
        for (hi, &z) in self.h.iter().zip(spins) {
            e += hi * f64::from(z);
        }
        for &(i, j, jij) in &self.couplings {
            e += jij * f64::from(spins[i]) * f64::from(spins[j]);
        }
        Ok(e)
    }
}

/// Iterates all `2^dim` bit assignments of `dim` variables (counting order).
#[cfg(test)]
pub(crate) fn all_assignments(dim: usize) -> impl Iterator<Item = Vec<u8>> {
    (0u64..(1 << dim)).map(move |mask| (0..dim).map(|b| ((mask >> b) & 1) as u8).collect())
}
