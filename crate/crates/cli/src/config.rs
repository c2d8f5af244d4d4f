//! Run configuration: a TOML document with one table per module, plus
//! command-line overrides. Seeds are always explicit; nothing falls back to
//! wall-clock entropy.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use qubo_svm::eval::{
    CvMethod, FalkQbsvmMethod, FalkQmsvmMethod, GlobalQbsvmMethod, GlobalQmsvmMethod,
};
use qubo_svm::falk::FalkParams;
use qubo_svm::kernel::KernelConfig;
use qubo_svm::neighbors::IndexBackend;
use qubo_svm::qmsvm::WeightingConfig;
use qubo_svm::qubo::{QbsvmQuboParams, QmsvmQuboParams};
use qubo_svm::sampler::{
    ExhaustiveSolver, RemoteSampler, Sampler, SamplerConfig, SimulatedAnnealingSampler,
    TemperatureSchedule,
};

use crate::CliError;

/// Environment variable overriding the remote sampler endpoint.
pub const REMOTE_ENDPOINT_ENV: &str = "QSVM_REMOTE_ENDPOINT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Binary,
    Multiclass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Local,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Sa,
    Exhaustive,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub skip_header: bool,
    /// Label column index; absent means the last column.
    pub label_column: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    /// Width used when `selection` is off; `-0.5` requests the median
    /// heuristic.
    pub gamma: f64,
    /// Grid searched when `selection` is on.
    pub grid: Vec<f64>,
    /// Run per-fold grid-search local model selection.
    pub selection: bool,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            grid: vec![-0.5, 1.0],
            selection: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FalkSection {
    pub k: usize,
    pub k_prime: usize,
    pub models_sampled: usize,
    pub internal_folds: usize,
    pub selection_eval_count: Option<usize>,
    /// Accepted for forward compatibility; rejected at validation.
    pub dynamic_local_model: bool,
    pub brute_force_index: bool,
}

impl Default for FalkSection {
    fn default() -> Self {
        Self {
            k: 80,
            k_prime: 60,
            models_sampled: 8,
            internal_folds: 5,
            selection_eval_count: None,
            dynamic_local_model: false,
            brute_force_index: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QbsvmSection {
    pub base: u32,
    pub bits: u32,
    pub penalty: f64,
    /// Slice size of the global ensemble.
    pub slice_size: usize,
}

impl Default for QbsvmSection {
    fn default() -> Self {
        Self {
            base: 2,
            bits: 2,
            penalty: 1.0,
            slice_size: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QmsvmSection {
    pub bits: u32,
    pub penalty: f64,
    pub regularization: f64,
    pub multiplier: f64,
    /// Stratified subset size for global training.
    pub subset_size: usize,
}

impl Default for QmsvmSection {
    fn default() -> Self {
        Self {
            bits: 2,
            penalty: 1.0,
            regularization: 1.0,
            multiplier: 10.0,
            subset_size: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub num_reads: usize,
    pub sweeps_per_read: usize,
    pub best_s: usize,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    /// Forwarded to remote backends; a documented no-op locally.
    pub chain_strength: f64,
    pub exhaustive_cap: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            num_reads: 1000,
            sweeps_per_read: 100,
            best_s: 100,
            t_start: None,
            t_end: None,
            chain_strength: 1.0,
            exhaustive_cap: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuboSection {
    /// Coefficients below `max_abs / max_min_ratio` are pruned before
    /// sampling; the default leaves matrices untouched.
    pub max_min_ratio: f64,
}

impl Default for QuboSection {
    fn default() -> Self {
        Self {
            max_min_ratio: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RemoteSection {
    pub endpoint: Option<String>,
    pub poll_interval_ms: Option<u64>,
    pub timeout_s: Option<u64>,
}

/// Full run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub mode: Mode,
    pub backend: Backend,
    pub seed: u64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub falk: FalkSection,
    #[serde(default)]
    pub qbsvm: QbsvmSection,
    #[serde(default)]
    pub qmsvm: QmsvmSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub qubo: QuboSection,
    #[serde(default)]
    pub remote: RemoteSection,
}

fn default_folds() -> usize {
    10
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, value_enum)]
    pub task: Option<Task>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub k_prime: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub selection: Option<bool>,
    #[arg(long)]
    pub num_reads: Option<usize>,
    #[arg(long)]
    pub endpoint: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(v) = overrides.seed {
            self.seed = v;
        }
        if let Some(v) = overrides.folds {
            self.folds = v;
        }
        if let Some(v) = overrides.task {
            self.task = v;
        }
        if let Some(v) = overrides.mode {
            self.mode = v;
        }
        if let Some(v) = overrides.backend {
            self.backend = v;
        }
        if let Some(v) = overrides.k {
            self.falk.k = v;
        }
        if let Some(v) = overrides.k_prime {
            self.falk.k_prime = v;
        }
        if let Some(v) = overrides.gamma {
            self.kernel.gamma = v;
        }
        if let Some(v) = overrides.selection {
            self.kernel.selection = v;
        }
        if let Some(v) = overrides.num_reads {
            self.sampler.num_reads = v;
        }
        if let Some(v) = &overrides.endpoint {
            self.remote.endpoint = Some(v.clone());
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.falk.dynamic_local_model {
            return Err(CliError::Config(
                "falk.dynamic_local_model is not implemented".into(),
            ));
        }
        if self.mode == Mode::Local && self.falk.k_prime >= self.falk.k {
            return Err(CliError::Config(format!(
                "falk.k_prime ({}) must be smaller than falk.k ({})",
                self.falk.k_prime, self.falk.k
            )));
        }
        self.kernel_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        for g in self.kernel_grid() {
            g.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if self.kernel.selection && self.kernel.grid.is_empty() {
            return Err(CliError::Config(
                "kernel.selection needs a non-empty kernel.grid".into(),
            ));
        }
        self.sampler_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.backend == Backend::Remote && self.resolved_endpoint().is_none() {
            return Err(CliError::Config(format!(
                "remote backend needs remote.endpoint or {REMOTE_ENDPOINT_ENV}"
            )));
        }
        Ok(())
    }

    pub fn kernel_config(&self) -> KernelConfig {
        KernelConfig {
            gamma: self.kernel.gamma,
        }
    }

    pub fn kernel_grid(&self) -> Vec<KernelConfig> {
        self.kernel.grid.iter().map(|&gamma| KernelConfig { gamma }).collect()
    }

    pub fn falk_params(&self) -> FalkParams {
        FalkParams {
            k: self.falk.k,
            k_prime: self.falk.k_prime,
            models_sampled: self.falk.models_sampled,
            internal_folds: self.falk.internal_folds,
            grid: self.kernel_grid(),
            selection_eval_count: self.falk.selection_eval_count,
            seed: self.seed,
            backend: if self.falk.brute_force_index {
                IndexBackend::BruteForce
            } else {
                IndexBackend::CoverTree
            },
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let schedule = match (self.sampler.t_start, self.sampler.t_end) {
            (Some(t_start), Some(t_end)) => TemperatureSchedule::Geometric { t_start, t_end },
            _ => TemperatureSchedule::Auto,
        };
        SamplerConfig {
            num_reads: self.sampler.num_reads,
            sweeps_per_read: self.sampler.sweeps_per_read,
            schedule,
            seed: self.seed,
            best_s: self.sampler.best_s,
            chain_strength: self.sampler.chain_strength,
        }
    }

    pub fn resolved_endpoint(&self) -> Option<String> {
        std::env::var(REMOTE_ENDPOINT_ENV)
            .ok()
            .filter(|v| !v.is_empty())
            .or_else(|| self.remote.endpoint.clone())
    }

    pub fn build_sampler(&self) -> Result<Arc<dyn Sampler>, CliError> {
        Ok(match self.backend {
            Backend::Sa => Arc::new(SimulatedAnnealingSampler::new()),
            Backend::Exhaustive => Arc::new(ExhaustiveSolver {
                max_dim: self.sampler.exhaustive_cap,
            }),
            Backend::Remote => {
                let endpoint = self.resolved_endpoint().ok_or_else(|| {
                    CliError::Config(format!(
                        "remote backend needs remote.endpoint or {REMOTE_ENDPOINT_ENV}"
                    ))
                })?;
                let mut sampler = RemoteSampler::new(endpoint);
                if let (Some(poll), Some(timeout)) =
                    (self.remote.poll_interval_ms, self.remote.timeout_s)
                {
                    sampler = sampler.with_timing(
                        std::time::Duration::from_millis(poll),
                        std::time::Duration::from_secs(timeout),
                    );
                }
                Arc::new(sampler)
            }
        })
    }

    pub fn qbsvm_params(&self, gamma_eff: f64) -> QbsvmQuboParams {
        QbsvmQuboParams {
            base: self.qbsvm.base,
            bits: self.qbsvm.bits,
            penalty: self.qbsvm.penalty,
            gamma_eff,
        }
    }

    pub fn qmsvm_params(&self, gamma_eff: f64) -> QmsvmQuboParams {
        QmsvmQuboParams {
            bits: self.qmsvm.bits,
            penalty: self.qmsvm.penalty,
            regularization: self.qmsvm.regularization,
            gamma_eff,
        }
    }

    pub fn weighting(&self) -> WeightingConfig {
        WeightingConfig {
            multiplier: self.qmsvm.multiplier,
        }
    }

    /// Builds the cross-validation method this config describes.
    pub fn build_method(&self) -> Result<Box<dyn CvMethod>, CliError> {
        let sampler = self.build_sampler()?;
        let sampler_cfg = self.sampler_config();
        Ok(match (self.task, self.mode) {
            (Task::Binary, Mode::Local) => Box::new(FalkQbsvmMethod {
                falk: self.falk_params(),
                kernel: self.kernel_config(),
                selection: self.kernel.selection,
                base: self.qbsvm.base,
                bits: self.qbsvm.bits,
                penalty: self.qbsvm.penalty,
                prune_ratio: self.qubo.max_min_ratio,
                sampler,
                sampler_cfg,
            }),
            (Task::Binary, Mode::Global) => Box::new(GlobalQbsvmMethod {
                params: self.qbsvm_params(self.require_fixed_gamma()?),
                slice_size: self.qbsvm.slice_size,
                prune_ratio: self.qubo.max_min_ratio,
                sampler,
                sampler_cfg,
            }),
            (Task::Multiclass, Mode::Local) => Box::new(FalkQmsvmMethod {
                falk: self.falk_params(),
                kernel: self.kernel_config(),
                selection: self.kernel.selection,
                bits: self.qmsvm.bits,
                penalty: self.qmsvm.penalty,
                regularization: self.qmsvm.regularization,
                weighting: self.weighting(),
                prune_ratio: self.qubo.max_min_ratio,
                sampler,
                sampler_cfg,
            }),
            (Task::Multiclass, Mode::Global) => Box::new(GlobalQmsvmMethod {
                params: self.qmsvm_params(self.require_fixed_gamma()?),
                subset_size: self.qmsvm.subset_size,
                weighting: self.weighting(),
                prune_ratio: self.qubo.max_min_ratio,
                sampler,
                sampler_cfg,
            }),
        })
    }

    /// Variables one sampler call will need for `class_count` classes, so
    /// capacity problems surface before any training starts.
    pub fn required_variables(&self, class_count: usize) -> usize {
        match (self.task, self.mode) {
            (Task::Binary, Mode::Local) => self.falk.k * self.qbsvm.bits as usize,
            (Task::Binary, Mode::Global) => self.qbsvm.slice_size * self.qbsvm.bits as usize,
            (Task::Multiclass, Mode::Local) => {
                self.falk.k * class_count * self.qmsvm.bits as usize
            }
            (Task::Multiclass, Mode::Global) => {
                self.qmsvm.subset_size * class_count * self.qmsvm.bits as usize
            }
        }
    }

    /// Rejects configurations whose problems cannot fit the backend.
    pub fn check_capacity(&self, class_count: usize) -> Result<(), CliError> {
        if self.backend == Backend::Exhaustive {
            let needed = self.required_variables(class_count);
            let cap = self.sampler.exhaustive_cap;
            if needed > cap {
                return Err(CliError::Config(format!(
                    "{needed} binary variables exceed the exhaustive sampler limit of {cap}"
                )));
            }
        }
        Ok(())
    }

    /// Global methods resolve the kernel once over the whole training set
    /// and so need a fixed width.
    fn require_fixed_gamma(&self) -> Result<f64, CliError> {
        if self.kernel.gamma > 0.0 {
            Ok(self.kernel.gamma)
        } else {
            Err(CliError::Config(
                "global methods need a fixed positive kernel.gamma".into(),
            ))
        }
    }
}
