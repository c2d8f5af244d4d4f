//! Versioned JSON model persistence.
//!
//! A saved model carries everything prediction needs: the standardizer
//! fitted on the training data, the original label values, and the model
//! payload itself. Nearest-neighbor indexes are rebuilt on load
//! (construction is deterministic), so only points and associations are
//! stored.

use std::path::Path;

use serde::{Deserialize, Serialize};

use qubo_svm::data::Standardizer;
use qubo_svm::falk::{FalkModel, LocalModel};
use qubo_svm::matrix::Matrix;
use qubo_svm::neighbors::IndexBackend;
use qubo_svm::qbsvm::{ensemble_decision, EnsembleModel};
use qubo_svm::qmsvm::{qmsvm_decision, MulticlassSvmModel};

use crate::config::{Mode, Task};
use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedFalk {
    pub backend: IndexBackend,
    pub points: Matrix,
    pub centers: Vec<usize>,
    pub assoc: Vec<usize>,
    pub k: usize,
    pub local_models: Vec<LocalModel>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedPayload {
    Falk(SavedFalk),
    Ensemble(EnsembleModel),
    Multiclass(MulticlassSvmModel),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedModel {
    pub format_version: u32,
    pub task: Task,
    pub mode: Mode,
    pub standardizer: Standardizer,
    /// Original label value per contiguous class index.
    pub label_values: Vec<i64>,
    pub payload: SavedPayload,
}

/// A loaded model ready to predict.
pub enum LoadedPredictor {
    Falk(FalkModel),
    Ensemble(EnsembleModel),
    Multiclass(MulticlassSvmModel),
}

impl SavedModel {
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Data(format!("model serialization failed: {e}")))?;
        std::fs::write(path, json)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        let model: SavedModel = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if model.format_version != FORMAT_VERSION {
            return Err(CliError::Data(format!(
                "{}: format version {} unsupported (expected {FORMAT_VERSION})",
                path.display(),
                model.format_version
            )));
        }
        model.check_consistency(path)?;
        Ok(model)
    }

    /// The payload must agree with the declared task and mode; a binary
    /// header on a multiclass payload (or vice versa) is a corrupt or
    /// mislabeled file.
    fn check_consistency(&self, path: &Path) -> Result<(), CliError> {
        let ok = match (&self.payload, self.task, self.mode) {
            (SavedPayload::Falk(f), task, Mode::Local) => f.local_models.iter().all(|m| {
                matches!(
                    (m, task),
                    (LocalModel::Binary(_), Task::Binary)
                        | (LocalModel::Multiclass(_), Task::Multiclass)
                        | (LocalModel::Constant(_), _)
                )
            }),
            (SavedPayload::Ensemble(_), Task::Binary, Mode::Global) => true,
            (SavedPayload::Multiclass(_), Task::Multiclass, Mode::Global) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(CliError::Data(format!(
                "{}: payload does not match task/mode header",
                path.display()
            )))
        }
    }

    pub fn into_predictor(self) -> Result<(LoadedPredictor, Standardizer, Vec<i64>), CliError> {
        let predictor = match self.payload {
            SavedPayload::Falk(f) => LoadedPredictor::Falk(
                FalkModel::from_parts(
                    f.backend,
                    f.points,
                    f.centers,
                    f.local_models,
                    f.assoc,
                    f.k,
                )
                .map_err(|e| CliError::Data(format!("inconsistent saved model: {e}")))?,
            ),
            SavedPayload::Ensemble(e) => LoadedPredictor::Ensemble(e),
            SavedPayload::Multiclass(m) => LoadedPredictor::Multiclass(m),
        };
        Ok((predictor, self.standardizer, self.label_values))
    }
}

impl LoadedPredictor {
    /// Class index prediction on a standardized row.
    pub fn predict(&self, x: &[f64]) -> usize {
        match self {
            Self::Falk(m) => m.predict(x),
            Self::Ensemble(m) => usize::from(ensemble_decision(m, x) > 0),
            Self::Multiclass(m) => qmsvm_decision(m, x),
        }
    }

    pub fn feature_count(&self) -> usize {
        match self {
            Self::Falk(m) => m.points().cols(),
            Self::Ensemble(m) => m.slices[0].support_points.cols(),
            Self::Multiclass(m) => m.support_points.cols(),
        }
    }
}

/// Packs a trained locality model for saving.
pub fn pack_falk(model: &FalkModel, backend: IndexBackend) -> SavedFalk {
    SavedFalk {
        backend,
        points: model.points().clone(),
        centers: model.centers().to_vec(),
        assoc: model.associations().to_vec(),
        k: model.neighborhood_size(),
        local_models: model.local_models().to_vec(),
    }
}
