use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crbm::data::{binarize, corrupt_flip, corrupt_occlude, load_idx_images, save_idx_images};
use crbm::harness::{
    build_index, cmd_evaluate, cmd_render_grid, cmd_train, identity_predictions, load_model,
    prepare_data, render_records, run_grid, save_model, task_metric, ExperimentConfig, GridSpec,
    MetricsReport,
};
use crbm::rng::{derive_seed, seeded};
use crbm::{CrbmError, Result};

#[derive(Parser)]
#[command(name = "crbm", version, about = "Conditional RBMs for structured output prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write a checkpoint with its sidecars.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Checkpoint path; `.meta`, `.report` and `.index` files go next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Report test-split metrics of a checkpoint, or of the identity baseline.
    Evaluate {
        #[arg(long, required_unless_present = "baseline")]
        checkpoint: Option<PathBuf>,
        /// Predict the noisy input itself (denoising tasks).
        #[arg(long, conflicts_with = "checkpoint")]
        baseline: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Sweep a hyperparameter grid, select on validation error, report the
    /// winner's test error.
    Grid {
        #[command(flatten)]
        config: ConfigArgs,
        /// Grid dimension as `KEY=V1,V2,...` (learning_rate, hidden_size,
        /// gibbs_k, n_bits). Unset dimensions use the task defaults.
        #[arg(long = "grid", value_name = "KEY=VALUES")]
        grid: Vec<String>,
        /// Optional checkpoint path for the winning model.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render clean / prediction-overlay tiles of test images as a PPM.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the spectral-hash index of a configured training split.
    HashIndex {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corrupt a (binarized) IDX image file.
    MakeNoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        noise: NoiseKind,
        #[arg(long, default_value_t = 0.1)]
        rate: f64,
        #[arg(long, default_value_t = 8)]
        patch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseKind {
    Flip,
    Occlude,
}

#[derive(Args)]
struct ConfigArgs {
    /// `key=value` configuration file, applied before any flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Decimal or `2^E`.
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    gibbs_k: Option<usize>,
    #[arg(long)]
    n_bits: Option<usize>,
    /// Any other configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("task", self.task.clone()),
            ("model", self.model.clone()),
            ("data", self.data.as_ref().map(|p| p.display().to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("learning_rate", self.learning_rate.clone()),
            ("hidden_size", self.hidden_size.map(|v| v.to_string())),
            ("gibbs_k", self.gibbs_k.map(|v| v.to_string())),
            ("n_bits", self.n_bits.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, &v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = split_kv(kv)?;
            config.set(k, v)?;
        }
        Ok(config)
    }
}

fn split_kv(kv: &str) -> Result<(&str, &str)> {
    kv.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| CrbmError::InvalidArgument(format!("expected KEY=VALUE, found `{kv}`")))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, out } => {
            let config = config.resolve()?;
            let model = cmd_train(&config, &out)?;
            if let Some(report) = &model.report {
                print!("{}", render_records(&report.to_records()));
            }
        }
        Command::Evaluate {
            checkpoint,
            baseline,
            config,
        } => {
            let report = if baseline {
                let config = config.resolve()?;
                let data = prepare_data(&config)?;
                let mut report = MetricsReport::new(config.task, "baseline");
                report
                    .folds
                    .push(task_metric(config.task, &identity_predictions(&data.test), &data.test)?);
                report
            } else {
                let checkpoint = checkpoint.expect("required by clap");
                cmd_evaluate(&checkpoint, config.data.as_deref())?
            };
            print!("{}", report.render());
        }
        Command::Grid { config, grid, out } => {
            let config = config.resolve()?;
            let mut spec = GridSpec::default_for(config.task);
            for kv in &grid {
                let (k, v) = split_kv(kv)?;
                spec.set(k, v)?;
            }
            let data = prepare_data(&config)?;
            let outcome = run_grid(&config, &spec, &data, |i, c, r| {
                eprintln!(
                    "[{i}] learning_rate={:?} hidden_size={} gibbs_k={} n_bits={} valid_error={:.4}",
                    c.learning_rate,
                    c.hidden_size,
                    c.gibbs_k,
                    c.n_bits,
                    r.best_valid_error()
                );
            })?;
            if let Some(out) = out {
                save_model(&outcome.model, &out)?;
            }
            print!("{}", outcome.render());
        }
        Command::Render {
            checkpoint,
            data,
            count,
            out,
        } => render(&checkpoint, data.as_deref(), count, &out)?,
        Command::HashIndex { config, out } => {
            let config = config.resolve()?;
            let data = prepare_data(&config)?;
            let index = build_index(&data.train, config.n_bits)?;
            index.save(&out)?;
            println!("buckets={}", index.buckets().count());
        }
        Command::MakeNoise {
            input,
            output,
            noise,
            rate,
            patch,
            seed,
        } => {
            let images = load_idx_images(&input)?;
            let clean = binarize(&images.images)?;
            let noisy = clean
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let mut rng = seeded(derive_seed(seed, &[i as u64]));
                    match noise {
                        NoiseKind::Flip => corrupt_flip(v, rate, &mut rng),
                        NoiseKind::Occlude => {
                            corrupt_occlude(v, patch, images.width, images.height, &mut rng)
                        }
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            save_idx_images(&noisy, images.width, images.height, &output)?;
            println!("images={}", noisy.len());
        }
    }
    Ok(())
}

fn render(checkpoint: &Path, data: Option<&Path>, count: usize, out: &Path) -> Result<()> {
    let mut model = load_model(checkpoint)?;
    if let Some(p) = data {
        model.config.data = Some(p.to_path_buf());
    }
    let prepared = prepare_data(&model.config)?;
    let (width, height) = prepared
        .image_size
        .ok_or_else(|| CrbmError::InvalidArgument("render needs a denoising task".into()))?;
    let examples = &prepared.test[..count.min(prepared.test.len())];
    let noisy: Vec<Vec<f64>> = examples.iter().map(|e| e.input.clone()).collect();
    let clean: Vec<_> = examples.iter().map(|e| e.target.clone()).collect();
    let predicted = model
        .predictor()
        .predict_all(noisy.iter().map(Vec::as_slice))?;
    cmd_render_grid(&noisy, &predicted, &clean, width, height, out)?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
