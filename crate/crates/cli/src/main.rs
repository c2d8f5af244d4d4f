//! `qsvm`: train, evaluate, and apply QUBO-trained (local) SVMs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4
//! sampler/backend error.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use qubo_svm::data::{load_csv, load_features_csv, make_blobs, save_csv, standardize_fit, BlobSpec, CsvOptions};
use qubo_svm::eval::run_cv;
use qubo_svm::falk::{local_model_selection, train_falk, QbsvmLocalTrainer, QmsvmLocalTrainer};
use qubo_svm::kernel::resolve_gamma;
use qubo_svm::qbsvm::train_qbsvm_ensemble;
use qubo_svm::qmsvm::{select_global_subset, train_qmsvm};
use qubo_svm::qubo::{build_qbsvm_qubo, build_qmsvm_qubo};
use qubo_svm_cli::config::{Mode, Overrides, RunConfig, Task};
use qubo_svm_cli::model_io::{pack_falk, SavedModel, SavedPayload, FORMAT_VERSION};
use qubo_svm_cli::{render, CliError};

#[derive(Parser)]
#[command(name = "qsvm", version, about = "QUBO-trained local and global SVMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stratified cross-validation of the configured method.
    Cv {
        #[arg(long)]
        config: PathBuf,
        /// Labeled CSV dataset.
        #[arg(long)]
        data: PathBuf,
        /// Report prefix; writes `<prefix>.txt` and `<prefix>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train on a full dataset and persist the model.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output model file (JSON).
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Predict labels for a features-only CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Output file, one label per row.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = false)]
        skip_header: bool,
    },
    /// Render a label grid (CSV rows) as a PPM image.
    RenderMap {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic Gaussian-blob dataset.
    GenBlobs {
        /// Class centers, e.g. "0,0;6,0".
        #[arg(long)]
        centers: String,
        /// One sigma per class, or a single shared value, e.g. "1" or "1,0.5".
        #[arg(long)]
        sigmas: String,
        /// Per-class sample counts, e.g. "250,250".
        #[arg(long)]
        counts: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the configured QUBO over a dataset and dump it as text.
    QuboDump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Cv {
            config,
            data,
            out,
            overrides,
        } => cmd_cv(&RunConfig::load(&config, &overrides)?, &data, out.as_deref()),
        Command::Train {
            config,
            data,
            model,
            overrides,
        } => cmd_train(&RunConfig::load(&config, &overrides)?, &data, &model),
        Command::Predict {
            model,
            input,
            out,
            skip_header,
        } => cmd_predict(&model, &input, &out, skip_header),
        Command::RenderMap { labels, out } => cmd_render_map(&labels, &out),
        Command::GenBlobs {
            centers,
            sigmas,
            counts,
            seed,
            out,
        } => cmd_gen_blobs(&centers, &sigmas, &counts, seed, &out),
        Command::QuboDump {
            config,
            data,
            out,
            overrides,
        } => cmd_qubo_dump(&RunConfig::load(&config, &overrides)?, &data, &out),
    }
}

fn csv_options(config: &RunConfig) -> CsvOptions {
    CsvOptions {
        label_column: config.data.label_column,
        skip_header: config.data.skip_header,
    }
}

fn cmd_cv(
    config: &RunConfig,
    data: &std::path::Path,
    out: Option<&std::path::Path>,
) -> Result<(), CliError> {
    let dataset = load_csv(data, &csv_options(config))?;
    config.check_capacity(dataset.class_count())?;
    let method = config.build_method()?;
    let report = run_cv(&dataset, method.as_ref(), config.folds, config.seed)?;
    println!("method: {}", report.method);
    println!("accuracy: {}", report.accuracy);
    println!("balanced_accuracy: {}", report.balanced_accuracy);
    println!("macro_f1: {}", report.macro_f1);
    if report.partial {
        println!("partial: true");
    }
    if let Some(prefix) = out {
        let text_path = prefix.with_extension("txt");
        let json_path = prefix.with_extension("json");
        std::fs::write(&text_path, report.to_text())
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", text_path.display())))?;
        std::fs::write(&json_path, report.to_json()?)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", json_path.display())))?;
    }
    Ok(())
}

fn cmd_train(
    config: &RunConfig,
    data: &std::path::Path,
    model_path: &std::path::Path,
) -> Result<(), CliError> {
    let dataset = load_csv(data, &csv_options(config))?;
    config.check_capacity(dataset.class_count())?;
    let scaler = standardize_fit(&dataset);
    let standardized = scaler.apply(&dataset)?;
    let sampler = config.build_sampler()?;
    let sampler_cfg = config.sampler_config();
    let prune_ratio = config.qubo.max_min_ratio;

    let payload = match (config.task, config.mode) {
        (Task::Binary, Mode::Local) => {
            let params = config.falk_params();
            let kernel = if config.kernel.selection {
                local_model_selection(&standardized, &params, |k| {
                    Box::new(QbsvmLocalTrainer {
                        kernel: *k,
                        base: config.qbsvm.base,
                        bits: config.qbsvm.bits,
                        penalty: config.qbsvm.penalty,
                        prune_ratio,
                        sampler: sampler.clone(),
                        sampler_cfg,
                    })
                })?
                .config
            } else {
                config.kernel_config()
            };
            let trainer = QbsvmLocalTrainer {
                kernel,
                base: config.qbsvm.base,
                bits: config.qbsvm.bits,
                penalty: config.qbsvm.penalty,
                prune_ratio,
                sampler: sampler.clone(),
                sampler_cfg,
            };
            let model = train_falk(&standardized, &params, &trainer)?;
            SavedPayload::Falk(pack_falk(&model, params.backend))
        }
        (Task::Multiclass, Mode::Local) => {
            let params = config.falk_params();
            let kernel = if config.kernel.selection {
                local_model_selection(&standardized, &params, |k| {
                    Box::new(QmsvmLocalTrainer {
                        kernel: *k,
                        bits: config.qmsvm.bits,
                        penalty: config.qmsvm.penalty,
                        regularization: config.qmsvm.regularization,
                        prune_ratio,
                        weighting: config.weighting(),
                        sampler: sampler.clone(),
                        sampler_cfg,
                    })
                })?
                .config
            } else {
                config.kernel_config()
            };
            let trainer = QmsvmLocalTrainer {
                kernel,
                bits: config.qmsvm.bits,
                penalty: config.qmsvm.penalty,
                regularization: config.qmsvm.regularization,
                prune_ratio,
                weighting: config.weighting(),
                sampler: sampler.clone(),
                sampler_cfg,
            };
            let model = train_falk(&standardized, &params, &trainer)?;
            SavedPayload::Falk(pack_falk(&model, params.backend))
        }
        (Task::Binary, Mode::Global) => {
            let gamma = resolve_gamma(&config.kernel_config(), &standardized)?;
            let model = train_qbsvm_ensemble(
                &standardized,
                &config.qbsvm_params(gamma),
                prune_ratio,
                sampler.as_ref(),
                &sampler_cfg,
                config.qbsvm.slice_size,
                config.seed,
            )?;
            SavedPayload::Ensemble(model)
        }
        (Task::Multiclass, Mode::Global) => {
            let subset = select_global_subset(&standardized, config.qmsvm.subset_size, config.seed)?;
            let gamma = resolve_gamma(&config.kernel_config(), &subset)?;
            let model = train_qmsvm(
                &subset,
                &config.qmsvm_params(gamma),
                prune_ratio,
                sampler.as_ref(),
                &sampler_cfg,
                &config.weighting(),
                Some(&standardized),
            )?;
            SavedPayload::Multiclass(model)
        }
    };

    let saved = SavedModel {
        format_version: FORMAT_VERSION,
        task: config.task,
        mode: config.mode,
        standardizer: scaler,
        label_values: dataset.label_values().to_vec(),
        payload,
    };
    saved.save(model_path)?;
    println!("model: {}", model_path.display());
    Ok(())
}

fn cmd_predict(
    model_path: &std::path::Path,
    input: &std::path::Path,
    out: &std::path::Path,
    skip_header: bool,
) -> Result<(), CliError> {
    let saved = SavedModel::load(model_path)?;
    let (predictor, scaler, label_values) = saved.into_predictor()?;
    let features = load_features_csv(input, skip_header)?;
    if features.cols() != predictor.feature_count() {
        return Err(CliError::Data(format!(
            "input has {} features but the model expects {}",
            features.cols(),
            predictor.feature_count()
        )));
    }
    let standardized = scaler.apply_matrix(&features)?;
    let mut lines = String::new();
    for i in 0..standardized.rows() {
        let class = predictor.predict(standardized.row(i));
        let value = label_values
            .get(class)
            .copied()
            .unwrap_or(class as i64);
        lines.push_str(&value.to_string());
        lines.push('\n');
    }
    std::fs::write(out, lines)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))?;
    Ok(())
}

fn cmd_render_map(labels: &std::path::Path, out: &std::path::Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(labels)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", labels.display())))?;
    let grid = render::parse_label_grid(&text)?;
    let mut bytes = Vec::new();
    render::render_prediction_map(&grid, &mut bytes)?;
    std::fs::write(out, bytes)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))?;
    Ok(())
}

fn cmd_gen_blobs(
    centers: &str,
    sigmas: &str,
    counts: &str,
    seed: u64,
    out: &std::path::Path,
) -> Result<(), CliError> {
    let centers: Vec<Vec<f64>> = centers
        .split(';')
        .map(|c| {
            c.split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("bad --centers: {e}")))?;
    let counts: Vec<usize> = counts
        .split(',')
        .map(|v| v.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("bad --counts: {e}")))?;
    let sigma_values: Vec<f64> = sigmas
        .split(',')
        .map(|v| v.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("bad --sigmas: {e}")))?;
    if counts.len() != centers.len() {
        return Err(CliError::Config(format!(
            "{} counts for {} centers",
            counts.len(),
            centers.len()
        )));
    }
    let sigmas: Vec<f64> = if sigma_values.len() == 1 {
        vec![sigma_values[0]; centers.len()]
    } else if sigma_values.len() == centers.len() {
        sigma_values
    } else {
        return Err(CliError::Config(format!(
            "{} sigmas for {} centers",
            sigma_values.len(),
            centers.len()
        )));
    };
    let specs: Vec<BlobSpec> = centers
        .into_iter()
        .zip(sigmas)
        .zip(counts)
        .map(|((center, sigma), count)| BlobSpec {
            center,
            sigma,
            count,
        })
        .collect();
    let dataset = make_blobs(&specs, seed)?;
    save_csv(&dataset, out)?;
    println!("rows: {}", dataset.len());
    Ok(())
}

fn cmd_qubo_dump(
    config: &RunConfig,
    data: &std::path::Path,
    out: &std::path::Path,
) -> Result<(), CliError> {
    let dataset = load_csv(data, &csv_options(config))?;
    let scaler = standardize_fit(&dataset);
    let standardized = scaler.apply(&dataset)?;
    let gamma = resolve_gamma(&config.kernel_config(), &standardized)?;
    let qubo = match config.task {
        Task::Binary => build_qbsvm_qubo(&standardized, &config.qbsvm_params(gamma))?,
        Task::Multiclass => build_qmsvm_qubo(&standardized, &config.qmsvm_params(gamma))?,
    };
    let pruned = qubo.prune(config.qubo.max_min_ratio)?;
    let mut bytes = Vec::new();
    pruned.write_text(&mut bytes)?;
    std::fs::write(out, bytes)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))?;
    println!("dim: {}", pruned.dim());
    Ok(())
}
