//! Dataset representation, CSV ingestion, standardization, stratified
//! folding, and synthetic blob generation.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seeding;

/// A labeled dataset: an `N x d` feature matrix plus one class index per row.
///
/// Labels are contiguous `0..class_count`; `label_values` remembers the
/// original integers they were remapped from (identity unless the data came
/// from a file with arbitrary labels). A dataset with a single class can be
/// loaded and inspected, but every training entry point rejects it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    class_count: usize,
    label_values: Vec<i64>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let label_values = (0..class_count as i64).collect();
        Self::with_label_values(features, labels, class_count, label_values)
    }

    pub fn with_label_values(
        features: Matrix,
        labels: Vec<usize>,
        class_count: usize,
        label_values: Vec<i64>,
    ) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::InvalidData("dataset must have at least one row".into()));
        }
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if class_count == 0 {
            return Err(Error::InvalidData("class count must be positive".into()));
        }
        if label_values.len() != class_count {
            return Err(Error::DimensionMismatch(format!(
                "{} label values for {class_count} classes",
                label_values.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::InvalidData(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            class_count,
            label_values,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Original label integer for a contiguous class index.
    pub fn label_value(&self, class: usize) -> i64 {
        self.label_values[class]
    }

    pub fn label_values(&self) -> &[i64] {
        &self.label_values
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        self.features.cols()
    }

    /// Class indices that actually occur, ascending.
    pub fn present_classes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.class_count];
        for &l in &self.labels {
            seen[l] = true;
        }
        (0..self.class_count).filter(|&c| seen[c]).collect()
    }

    /// Per-class row counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Subset holding the given rows, preserving class metadata.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidData("cannot select an empty subset".into()));
        }
        Ok(Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            label_values: self.label_values.clone(),
        })
    }
}

/// Per-feature affine normalization fitted on training data.
///
/// Uses the population standard deviation (divide by N); zero-variance
/// features get std 1 so the column is preserved as constant zero instead of
/// being dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Fits per-feature mean and population standard deviation.
pub fn standardize_fit(train: &Dataset) -> Standardizer {
    let n = train.len() as f64;
    let d = train.dims();
    let mut means = vec![0.0; d];
    for row in train.features().iter_rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut vars = vec![0.0; d];
    for row in train.features().iter_rows() {
        for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
            let dev = v - m;
            *s += dev * dev;
        }
    }
    let stds = vars
        .iter()
        .map(|&s| {
            let sd = (s / n).sqrt();
            if sd == 0.0 {
                1.0
            } else {
                sd
            }
        })
        .collect();
    Standardizer { means, stds }
}

impl Standardizer {
    pub fn dims(&self) -> usize {
        self.means.len()
    }

    /// `(x - mean) / std` per feature.
    pub fn apply_matrix(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.dims() {
            return Err(Error::DimensionMismatch(format!(
                "standardizer has {} features, data has {}",
                self.dims(),
                features.cols()
            )));
        }
        let mut out = features.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.means[j]) / self.stds[j];
            }
        }
        Ok(out)
    }

    /// Standardizes the features; labels pass through untouched.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        Ok(Dataset {
            features: self.apply_matrix(&data.features)?,
            labels: data.labels.clone(),
            class_count: data.class_count,
            label_values: data.label_values.clone(),
        })
    }

    /// Undoes `apply_matrix`: `x * std + mean`.
    pub fn inverse_matrix(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.dims() {
            return Err(Error::DimensionMismatch(format!(
                "standardizer has {} features, data has {}",
                self.dims(),
                features.cols()
            )));
        }
        let mut out = features.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * self.stds[j] + self.means[j];
            }
        }
        Ok(out)
    }
}

/// Assignment of every row to one of `folds` cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub folds: usize,
}

impl FoldAssignment {
    /// Indices held out by `fold` and the complementary training indices.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.fold_of.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Stratified k-fold split: each class's indices are shuffled with the seed
/// and dealt round-robin, so fold sizes and per-class counts both differ by
/// at most one.
pub fn stratified_kfold(data: &Dataset, folds: usize, seed: u64) -> Result<FoldAssignment> {
    if folds < 2 {
        return Err(Error::InvalidParam(format!("fold count {folds} must be >= 2")));
    }
    if folds > data.len() {
        return Err(Error::InvalidParam(format!(
            "fold count {folds} exceeds {} samples",
            data.len()
        )));
    }
    let mut rng = seeding::rng(seed);
    let mut fold_of = vec![0usize; data.len()];
    let mut cursor = 0usize;
    for class in 0..data.class_count() {
        let mut members: Vec<usize> = (0..data.len())
            .filter(|&i| data.labels()[i] == class)
            .collect();
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = cursor % folds;
            cursor += 1;
        }
    }
    Ok(FoldAssignment { fold_of, folds })
}

/// One Gaussian cluster of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub center: Vec<f64>,
    pub sigma: f64,
    pub count: usize,
}

/// Generates isotropic Gaussian clusters, one class per spec, rows grouped
/// by class. Deterministic for a fixed seed.
pub fn make_blobs(specs: &[BlobSpec], seed: u64) -> Result<Dataset> {
    if specs.len() < 2 {
        return Err(Error::InvalidParam("need at least two classes".into()));
    }
    let dims = specs[0].center.len();
    for (c, s) in specs.iter().enumerate() {
        if s.center.len() != dims {
            return Err(Error::DimensionMismatch(format!(
                "class {c} center has {} dims, expected {dims}",
                s.center.len()
            )));
        }
        if s.count == 0 {
            return Err(Error::InvalidParam(format!("class {c} has zero samples")));
        }
    }
    let mut rng = seeding::rng(seed);
    let total: usize = specs.iter().map(|s| s.count).sum();
    let mut data = Vec::with_capacity(total * dims);
    let mut labels = Vec::with_capacity(total);
    for (c, spec) in specs.iter().enumerate() {
        for _ in 0..spec.count {
            for &center in &spec.center {
                let z: f64 = rng.sample(StandardNormal);
                data.push(center + spec.sigma * z);
            }
            labels.push(c);
        }
    }
    Dataset::new(Matrix::new(total, dims, data)?, labels, specs.len())
}

/// Options for [`load_csv`].
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Column holding the integer label; `None` means the last column.
    pub label_column: Option<usize>,
    /// Skip one header line before parsing.
    pub skip_header: bool,
}

/// Loads a comma-separated dataset. Labels are remapped to contiguous
/// `0..C` preserving the sorted order of the original integers; the original
/// values are kept on the dataset for output.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    let mut width = None;
    for (line_idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = line_idx + 1;
        if line_idx == 0 && opts.skip_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("row has {} columns, expected {w}", fields.len()),
                });
            }
            _ => {}
        }
        let label_col = opts.label_column.unwrap_or(fields.len().saturating_sub(1));
        if label_col >= fields.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("label column {label_col} out of range ({} columns)", fields.len()),
            });
        }
        let label: i64 = fields[label_col].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("label {:?} is not an integer", fields[label_col]),
        })?;
        let mut row = Vec::with_capacity(fields.len() - 1);
        for (col, field) in fields.iter().enumerate() {
            if col == label_col {
                continue;
            }
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("feature {field:?} in column {col} is not numeric"),
            })?;
            row.push(v);
        }
        rows.push(row);
        raw_labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::InvalidData(format!("{} holds no data rows", path.display())));
    }
    let mut distinct: Vec<i64> = raw_labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let labels = raw_labels
        .iter()
        .map(|l| distinct.binary_search(l).expect("label present"))
        .collect();
    Dataset::with_label_values(Matrix::from_rows(&rows)?, labels, distinct.len(), distinct)
}

/// Loads a features-only CSV (no label column).
pub fn load_features_csv(path: &Path, skip_header: bool) -> Result<Matrix> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (line_idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = line_idx + 1;
        if line_idx == 0 && skip_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("row has {} columns, expected {w}", fields.len()),
                });
            }
            _ => {}
        }
        let row: Result<Vec<f64>> = fields
            .iter()
            .map(|f| {
                f.trim().parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("value {f:?} is not numeric"),
                })
            })
            .collect();
        rows.push(row?);
    }
    if rows.is_empty() {
        return Err(Error::InvalidData(format!("{} holds no data rows", path.display())));
    }
    Matrix::from_rows(&rows)
}

/// Writes a dataset as CSV, features first, original label value last.
pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..data.len() {
        for v in data.features().row(i) {
            write!(out, "{v},")?;
        }
        writeln!(out, "{}", data.label_value(data.labels()[i]))?;
    }
    out.flush()?;
    Ok(())
}
