//! Experiment plumbing behind the command-line tool: configuration,
//! data preparation, training, evaluation, grid search, reports and
//! figure rendering.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bits::BitVector;
use crate::data::{binarize, load_idx_images, load_multilabel, make_folds, ImagePairDataset, Noise};
use crate::error::{check_len, CrbmError, Result};
use crate::hashing::{SpectralHashConfig, SpectralHashIndex};
use crate::metrics::{denoise_errors, per_label_error, DenoiseErrors};
use crate::model::{load_params, save_params, CrbmParams};
use crate::training::{train, Example, ModelKind, Predictor, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Multilabel,
    DenoiseFlip,
    DenoiseOcclude,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Multilabel => "multilabel",
            Task::DenoiseFlip => "denoise-flip",
            Task::DenoiseOcclude => "denoise-occlude",
        }
    }

    pub fn is_denoise(self) -> bool {
        self != Task::Multilabel
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = CrbmError;

    fn from_str(s: &str) -> Result<Self> {
        [Task::Multilabel, Task::DenoiseFlip, Task::DenoiseOcclude]
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| CrbmError::invalid(format!("unknown task `{s}`")))
    }
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub model: ModelKind,
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub gibbs_k: usize,
    pub predict_k: usize,
    pub n_bits: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
    /// Seed of the data split and of the noise process.
    pub data_seed: u64,
    pub fold: usize,
    pub n_folds: usize,
    pub train_size: usize,
    pub valid_size: usize,
    pub test_size: usize,
    pub flip_rate: f64,
    pub patch: usize,
    pub data: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Multilabel,
            model: ModelKind::LogReg,
            hidden_size: 64,
            learning_rate: 2f64.powi(-6),
            gibbs_k: 1,
            predict_k: 10,
            n_bits: 7,
            epochs: 50,
            batch_size: 128,
            patience: 10,
            seed: 0,
            data_seed: 0,
            fold: 0,
            n_folds: 10,
            train_size: 2000,
            valid_size: 500,
            test_size: 500,
            flip_rate: 0.1,
            patch: 8,
            data: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CrbmError::invalid(format!("bad value `{value}` for `{key}`")))
}

/// Parses `2^-6` style powers of two as well as plain decimals.
pub fn parse_rate(value: &str) -> Result<f64> {
    let rate = match value.strip_prefix("2^") {
        Some(exp) => 2f64.powi(parse_value("learning_rate", exp)?),
        None => parse_value("learning_rate", value)?,
    };
    if rate.is_finite() && rate >= 0.0 {
        Ok(rate)
    } else {
        Err(CrbmError::invalid(format!("bad learning rate `{value}`")))
    }
}

/// Splits `key=value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str, source: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CrbmError::Parse {
            path: source.into(),
            line: i + 1,
            message: format!("expected key=value, found `{line}`"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 20] = [
        "task",
        "model",
        "hidden_size",
        "learning_rate",
        "gibbs_k",
        "predict_k",
        "n_bits",
        "epochs",
        "batch_size",
        "patience",
        "seed",
        "data_seed",
        "fold",
        "n_folds",
        "train_size",
        "valid_size",
        "test_size",
        "flip_rate",
        "patch",
        "data",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "task" => self.task = value.parse()?,
            "model" => self.model = value.parse()?,
            "hidden_size" => self.hidden_size = parse_value(key, value)?,
            "learning_rate" => self.learning_rate = parse_rate(value)?,
            "gibbs_k" => self.gibbs_k = parse_value(key, value)?,
            "predict_k" => self.predict_k = parse_value(key, value)?,
            "n_bits" => self.n_bits = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "data_seed" => self.data_seed = parse_value(key, value)?,
            "fold" => self.fold = parse_value(key, value)?,
            "n_folds" => self.n_folds = parse_value(key, value)?,
            "train_size" => self.train_size = parse_value(key, value)?,
            "valid_size" => self.valid_size = parse_value(key, value)?,
            "test_size" => self.test_size = parse_value(key, value)?,
            "flip_rate" => self.flip_rate = parse_value(key, value)?,
            "patch" => self.patch = parse_value(key, value)?,
            "data" => self.data = Some(PathBuf::from(value)),
            _ => return Err(CrbmError::invalid(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (k, v) in parse_key_values(text, source)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config = ExperimentConfig::default();
        config.apply_text(&fs::read_to_string(path)?, &path.display().to_string())?;
        Ok(config)
    }

    pub fn to_records(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("task".to_string(), self.task.to_string()),
            ("model".to_string(), self.model.to_string()),
            ("hidden_size".to_string(), self.hidden_size.to_string()),
            ("learning_rate".to_string(), format!("{:?}", self.learning_rate)),
            ("gibbs_k".to_string(), self.gibbs_k.to_string()),
            ("predict_k".to_string(), self.predict_k.to_string()),
            ("n_bits".to_string(), self.n_bits.to_string()),
            ("epochs".to_string(), self.epochs.to_string()),
            ("batch_size".to_string(), self.batch_size.to_string()),
            ("patience".to_string(), self.patience.to_string()),
            ("seed".to_string(), self.seed.to_string()),
            ("data_seed".to_string(), self.data_seed.to_string()),
            ("fold".to_string(), self.fold.to_string()),
            ("n_folds".to_string(), self.n_folds.to_string()),
            ("train_size".to_string(), self.train_size.to_string()),
            ("valid_size".to_string(), self.valid_size.to_string()),
            ("test_size".to_string(), self.test_size.to_string()),
            ("flip_rate".to_string(), format!("{:?}", self.flip_rate)),
            ("patch".to_string(), self.patch.to_string()),
        ];
        if let Some(p) = &self.data {
            out.push(("data".to_string(), p.display().to_string()));
        }
        out
    }

    pub fn to_text(&self) -> String {
        render_records(&self.to_records())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            gibbs_k: self.gibbs_k,
            predict_k: self.predict_k,
            patience: self.patience,
            hidden_units: self.hidden_size,
            seed: self.seed,
        }
    }

    pub fn noise(&self) -> Option<Noise> {
        match self.task {
            Task::Multilabel => None,
            Task::DenoiseFlip => Some(Noise::Flip { rate: self.flip_rate }),
            Task::DenoiseOcclude => Some(Noise::Occlude { patch: self.patch }),
        }
    }

    fn data_path(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| CrbmError::invalid("no data path configured"))
    }
}

pub fn render_records(records: &[(String, String)]) -> String {
    records.iter().fold(String::new(), |mut s, (k, v)| {
        let _ = writeln!(s, "{k}={v}");
        s
    })
}

/// Value lists swept by [`run_grid`]. Dimensions irrelevant to a model are
/// not expanded for it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub hidden_sizes: Vec<usize>,
    pub gibbs_ks: Vec<usize>,
    pub n_bits: Vec<usize>,
}

impl GridSpec {
    pub fn default_for(task: Task) -> Self {
        let learning_rates = match task {
            Task::Multilabel => vec![-4, -6, -8, -10],
            _ => (0..=7).map(|i| -2 * i).collect(),
        }
        .into_iter()
        .map(|e| 2f64.powi(e))
        .collect();
        GridSpec {
            learning_rates,
            hidden_sizes: vec![32, 64, 128, 256],
            gibbs_ks: vec![1, 10, 20],
            n_bits: vec![5, 7, 9],
        }
    }

    /// A grid with exactly the values of `config`.
    pub fn single(config: &ExperimentConfig) -> Self {
        GridSpec {
            learning_rates: vec![config.learning_rate],
            hidden_sizes: vec![config.hidden_size],
            gibbs_ks: vec![config.gibbs_k],
            n_bits: vec![config.n_bits],
        }
    }

    /// Overrides one dimension from a comma-separated list.
    pub fn set(&mut self, key: &str, values: &str) -> Result<()> {
        let items = values.split(',').map(str::trim).filter(|s| !s.is_empty());
        match key {
            "learning_rate" => self.learning_rates = items.map(parse_rate).collect::<Result<_>>()?,
            "hidden_size" => self.hidden_sizes = items.map(|v| parse_value(key, v)).collect::<Result<_>>()?,
            "gibbs_k" => self.gibbs_ks = items.map(|v| parse_value(key, v)).collect::<Result<_>>()?,
            "n_bits" => self.n_bits = items.map(|v| parse_value(key, v)).collect::<Result<_>>()?,
            _ => return Err(CrbmError::invalid(format!("unknown grid key `{key}`"))),
        }
        Ok(())
    }

    /// Configurations in enumeration order: learning rate outermost, then
    /// hidden size, Gibbs steps and code length.
    pub fn expand(&self, base: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
        let model = base.model;
        let pick = |values: &[usize], used: bool, current: usize| -> Vec<usize> {
            if used {
                values.to_vec()
            } else {
                vec![current]
            }
        };
        let hidden = pick(&self.hidden_sizes, model != ModelKind::LogReg, base.hidden_size);
        let ks = pick(
            &self.gibbs_ks,
            matches!(model, ModelKind::Cd | ModelKind::PercLoss),
            base.gibbs_k,
        );
        let bits = pick(&self.n_bits, model == ModelKind::HashCrbm, base.n_bits);
        let mut out = Vec::new();
        for &lr in &self.learning_rates {
            for &h in &hidden {
                for &k in &ks {
                    for &b in &bits {
                        out.push(ExperimentConfig {
                            learning_rate: lr,
                            hidden_size: h,
                            gibbs_k: k,
                            n_bits: b,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(CrbmError::invalid("grid is empty"));
        }
        Ok(out)
    }
}

/// Train, validation and test examples for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub train: Vec<Example>,
    pub valid: Vec<Example>,
    pub test: Vec<Example>,
    /// Image geometry for denoising tasks.
    pub image_size: Option<(usize, usize)>,
}

/// Loads and splits the configured dataset.
///
/// Multi-label data is split by fold `fold` of `n_folds` seeded resplits.
/// Image data is binarized, the first `train_size + valid_size + test_size`
/// images are taken in file order, and each is corrupted with its own
/// stream derived from `data_seed`.
pub fn prepare_data(config: &ExperimentConfig) -> Result<PreparedData> {
    let path = config.data_path()?;
    match config.noise() {
        None => {
            let ds = load_multilabel(path)?;
            let folds = make_folds(ds.len(), config.n_folds, config.data_seed)?;
            let fold = folds.get(config.fold).ok_or_else(|| {
                CrbmError::invalid(format!("fold {} out of range 0..{}", config.fold, config.n_folds))
            })?;
            Ok(PreparedData {
                train: ds.examples(&fold.train),
                valid: ds.examples(&fold.valid),
                test: ds.examples(&fold.test),
                image_size: None,
            })
        }
        Some(noise) => {
            let images = load_idx_images(path)?;
            let clean = binarize(&images.images)?;
            let pairs = ImagePairDataset::corrupt(clean, images.width, images.height, noise, config.data_seed)?;
            split_image_pairs(&pairs, config.train_size, config.valid_size, config.test_size)
        }
    }
}

/// Consecutive train / valid / test blocks from the start of `pairs`.
pub fn split_image_pairs(
    pairs: &ImagePairDataset,
    train: usize,
    valid: usize,
    test: usize,
) -> Result<PreparedData> {
    let needed = train + valid + test;
    if pairs.len() < needed {
        return Err(CrbmError::invalid(format!(
            "need {needed} images, dataset has {}",
            pairs.len()
        )));
    }
    Ok(PreparedData {
        train: pairs.slice(0..train).examples(),
        valid: pairs.slice(train..train + valid).examples(),
        test: pairs.slice(train + valid..needed).examples(),
        image_size: Some((pairs.width, pairs.height)),
    })
}

/// A trained model with whatever its predictor needs.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: ExperimentConfig,
    pub params: CrbmParams,
    pub index: Option<SpectralHashIndex>,
    /// Absent for models loaded from disk.
    pub report: Option<TrainReport>,
}

impl TrainedModel {
    pub fn predictor(&self) -> Predictor<'_> {
        Predictor {
            kind: self.config.model,
            params: &self.params,
            predict_k: self.config.predict_k,
            index: self.index.as_ref(),
        }
    }
}

/// Spectral-hash index over the training pairs; PCA keeps
/// `min(n_bits, input dimension)` directions.
pub fn build_index(train: &[Example], n_bits: usize) -> Result<SpectralHashIndex> {
    let dim = train
        .first()
        .map(|e| e.input.len())
        .ok_or_else(|| CrbmError::invalid("cannot index an empty training set"))?;
    let pairs: Vec<(Vec<f64>, BitVector)> = train
        .iter()
        .map(|e| (e.input.clone(), e.target.clone()))
        .collect();
    let config = SpectralHashConfig {
        pca_dims: n_bits.min(dim),
        ..SpectralHashConfig::with_bits(n_bits)
    };
    SpectralHashIndex::build(&pairs, &config)
}

pub fn train_model(config: &ExperimentConfig, data: &PreparedData) -> Result<TrainedModel> {
    let index = match config.model {
        ModelKind::HashCrbm => Some(build_index(&data.train, config.n_bits)?),
        _ => None,
    };
    let (params, report) = train(
        config.model,
        &data.train,
        &data.valid,
        &config.train_config(),
        index.as_ref(),
    )?;
    Ok(TrainedModel {
        config: config.clone(),
        params,
        index,
        report: Some(report),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskMetric {
    /// Average per-label error (%).
    PerLabel(f64),
    Denoise(DenoiseErrors),
}

impl TaskMetric {
    /// The scalar used for model selection: per-label error, or the error
    /// over all pixels for denoising.
    pub fn selection_value(&self) -> f64 {
        match self {
            TaskMetric::PerLabel(e) => *e,
            TaskMetric::Denoise(d) => d.all,
        }
    }
}

pub fn task_metric(task: Task, predictions: &[BitVector], examples: &[Example]) -> Result<TaskMetric> {
    check_len("prediction count", examples.len(), predictions.len())?;
    let targets: Vec<BitVector> = examples.iter().map(|e| e.target.clone()).collect();
    if task.is_denoise() {
        let noisy: Vec<Vec<f64>> = examples.iter().map(|e| e.input.clone()).collect();
        Ok(TaskMetric::Denoise(denoise_errors(predictions, &targets, &noisy)?))
    } else {
        Ok(TaskMetric::PerLabel(per_label_error(predictions, &targets)?))
    }
}

pub fn evaluate_model(model: &TrainedModel, examples: &[Example]) -> Result<TaskMetric> {
    let predictions = model
        .predictor()
        .predict_all(examples.iter().map(|e| e.input.as_slice()))?;
    task_metric(model.config.task, &predictions, examples)
}

/// The identity baseline for denoising: predict `u` itself, thresholded at 0.5.
pub fn identity_predictions(examples: &[Example]) -> Vec<BitVector> {
    examples
        .iter()
        .map(|e| BitVector::threshold(&e.input, 0.5))
        .collect()
}

/// Per-fold metrics of one model on one task.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub task: Task,
    pub model: String,
    pub folds: Vec<TaskMetric>,
}

impl MetricsReport {
    pub fn new(task: Task, model: impl Into<String>) -> Self {
        MetricsReport {
            task,
            model: model.into(),
            folds: Vec::new(),
        }
    }

    fn mean_of(&self, f: impl Fn(&TaskMetric) -> f64) -> f64 {
        self.folds.iter().map(f).sum::<f64>() / self.folds.len() as f64
    }

    pub fn mean_error(&self) -> f64 {
        self.mean_of(TaskMetric::selection_value)
    }

    pub fn mean_changed(&self) -> Option<f64> {
        self.task.is_denoise().then(|| {
            self.mean_of(|m| match m {
                TaskMetric::Denoise(d) => d.changed,
                TaskMetric::PerLabel(_) => f64::NAN,
            })
        })
    }

    /// `key=value` summary lines followed by a TSV table of folds.
    pub fn render(&self) -> String {
        let mut out = format!("task={}\nmodel={}\nfolds={}\n", self.task, self.model, self.folds.len());
        match self.mean_changed() {
            Some(changed) => {
                let _ = writeln!(out, "mean_all={:.4}\nmean_changed={changed:.4}", self.mean_error());
                out.push_str("fold\tall\tchanged\n");
            }
            None => {
                let _ = writeln!(out, "mean_error={:.4}", self.mean_error());
                out.push_str("fold\terror\n");
            }
        }
        for (i, m) in self.folds.iter().enumerate() {
            let _ = match m {
                TaskMetric::PerLabel(e) => writeln!(out, "{i}\t{e:.4}"),
                TaskMetric::Denoise(d) => writeln!(out, "{i}\t{:.4}\t{:.4}", d.all, d.changed),
            };
        }
        out
    }
}

/// Outcome of a grid search: every configuration's validation error and
/// the winner's test metric.
#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub configs: Vec<ExperimentConfig>,
    pub reports: Vec<TrainReport>,
    pub winner: usize,
    pub model: TrainedModel,
    pub test: TaskMetric,
}

impl GridOutcome {
    pub fn winner_config(&self) -> &ExperimentConfig {
        &self.configs[self.winner]
    }

    pub fn render(&self) -> String {
        let w = self.winner_config();
        let mut out = format!(
            "winner={}\nlearning_rate={:?}\nhidden_size={}\ngibbs_k={}\nn_bits={}\nvalid_error={:.4}\n",
            self.winner,
            w.learning_rate,
            w.hidden_size,
            w.gibbs_k,
            w.n_bits,
            self.reports[self.winner].best_valid_error()
        );
        match self.test {
            TaskMetric::PerLabel(e) => {
                let _ = writeln!(out, "test_error={e:.4}");
            }
            TaskMetric::Denoise(d) => {
                let _ = writeln!(out, "test_all={:.4}\ntest_changed={:.4}", d.all, d.changed);
            }
        }
        out.push_str("index\tlearning_rate\thidden_size\tgibbs_k\tn_bits\tbest_epoch\tvalid_error\n");
        for (i, (c, r)) in self.configs.iter().zip(&self.reports).enumerate() {
            let _ = writeln!(
                out,
                "{i}\t{:?}\t{}\t{}\t{}\t{}\t{:.4}",
                c.learning_rate,
                c.hidden_size,
                c.gibbs_k,
                c.n_bits,
                r.best_epoch,
                r.best_valid_error()
            );
        }
        out
    }
}

/// Trains every configuration, keeps the one with the lowest validation
/// error (first in enumeration order on ties) and evaluates only that one
/// on the test split. `progress` sees each finished configuration.
pub fn run_grid(
    base: &ExperimentConfig,
    grid: &GridSpec,
    data: &PreparedData,
    mut progress: impl FnMut(usize, &ExperimentConfig, &TrainReport),
) -> Result<GridOutcome> {
    let configs = grid.expand(base)?;
    let mut reports = Vec::with_capacity(configs.len());
    let mut best: Option<(usize, f64, TrainedModel)> = None;
    for (i, config) in configs.iter().enumerate() {
        let model = train_model(config, data)?;
        let report = model.report.clone().expect("freshly trained");
        progress(i, config, &report);
        let error = report.best_valid_error();
        reports.push(report);
        if best.as_ref().is_none_or(|(_, e, _)| error < *e) {
            best = Some((i, error, model));
        }
    }
    let (winner, _, model) = best.expect("grid is non-empty");
    let test = evaluate_model(&model, &data.test)?;
    Ok(GridOutcome {
        configs,
        reports,
        winner,
        model,
        test,
    })
}

fn sidecar(checkpoint: &Path, ext: &str) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

/// Writes the parameters to `checkpoint`, the run configuration to
/// `<checkpoint>.meta`, the hash index (if any) to `<checkpoint>.index`
/// and the training report to `<checkpoint>.report`.
pub fn save_model(model: &TrainedModel, checkpoint: &Path) -> Result<()> {
    save_params(&model.params, checkpoint)?;
    fs::write(sidecar(checkpoint, ".meta"), model.config.to_text())?;
    if let Some(index) = &model.index {
        index.save(sidecar(checkpoint, ".index"))?;
    }
    if let Some(report) = &model.report {
        fs::write(sidecar(checkpoint, ".report"), render_records(&report.to_records()))?;
    }
    Ok(())
}

/// Loads a checkpoint written by [`save_model`].
pub fn load_model(checkpoint: &Path) -> Result<TrainedModel> {
    let params = load_params(checkpoint)?;
    let config = ExperimentConfig::from_file(sidecar(checkpoint, ".meta"))?;
    let index = match config.model {
        ModelKind::HashCrbm => Some(SpectralHashIndex::load(sidecar(checkpoint, ".index"))?),
        _ => None,
    };
    Ok(TrainedModel {
        config,
        params,
        index,
        report: None,
    })
}

pub fn cmd_train(config: &ExperimentConfig, checkpoint: &Path) -> Result<TrainedModel> {
    let data = prepare_data(config)?;
    let model = train_model(config, &data)?;
    save_model(&model, checkpoint)?;
    Ok(model)
}

/// Test-split metrics of a saved model. `data` overrides the dataset path
/// recorded with the checkpoint.
pub fn cmd_evaluate(checkpoint: &Path, data: Option<&Path>) -> Result<MetricsReport> {
    let mut model = load_model(checkpoint)?;
    if let Some(p) = data {
        model.config.data = Some(p.to_path_buf());
    }
    let prepared = prepare_data(&model.config)?;
    if let Some(e) = prepared.test.first() {
        check_len("checkpoint input width", model.params.n_input(), e.input.len())?;
        check_len("checkpoint output width", model.params.n_visible(), e.target.len())?;
    }
    let mut report = MetricsReport::new(model.config.task, model.config.model.name());
    report.folds.push(evaluate_model(&model, &prepared.test)?);
    Ok(report)
}

pub fn cmd_grid(config: &ExperimentConfig, grid: &GridSpec) -> Result<GridOutcome> {
    let data = prepare_data(config)?;
    run_grid(config, grid, &data, |_, _, _| {})
}

/// An 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

pub const WHITE: [u8; 3] = [255, 255, 255];
pub const RED: [u8; 3] = [255, 0, 0];
pub const BLACK: [u8; 3] = [0, 0, 0];
const GAP: [u8; 3] = [96, 96, 96];

impl RgbImage {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        RgbImage {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn put(&mut self, x: usize, y: usize, c: [u8; 3]) {
        self.pixels[y * self.width + x] = c;
    }

    pub fn write_ppm<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        for p in &self.pixels {
            out.write_all(p)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_ppm<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let bad = |m: &str| CrbmError::format("ppm", m.to_string());
        let mut pos = 0;
        let mut fields = Vec::new();
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        pos += 1;
        if fields[0] != "P6" {
            return Err(bad("not a binary PPM"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
        let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval != 255 {
            return Err(bad("only 8-bit PPM is supported"));
        }
        let body = bytes.get(pos..).unwrap_or_default();
        if body.len() != width * height * 3 {
            return Err(bad("pixel data has the wrong length"));
        }
        Ok(RgbImage {
            width,
            height,
            pixels: body.chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
        })
    }
}

/// Figure grid: one row per example with the clean image (white on black)
/// followed by the overlay of the prediction on the noisy input — white
/// where both are on, red where only the prediction is on, black
/// elsewhere. Tiles are separated by one grey pixel.
pub fn render_grid(
    noisy: &[Vec<f64>],
    predicted: &[BitVector],
    clean: &[BitVector],
    width: usize,
    height: usize,
) -> Result<RgbImage> {
    check_len("predicted count", noisy.len(), predicted.len())?;
    check_len("clean count", noisy.len(), clean.len())?;
    let n = noisy.len();
    let mut img = RgbImage::new(2 * width + 3, n * (height + 1) + 1, GAP);
    for (row, ((u, p), c)) in noisy.iter().zip(predicted).zip(clean).enumerate() {
        check_len("noisy pixels", width * height, u.len())?;
        check_len("predicted pixels", width * height, p.len())?;
        check_len("clean pixels", width * height, c.len())?;
        let y0 = 1 + row * (height + 1);
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                img.put(1 + x, y0 + y, if c.get(i) { WHITE } else { BLACK });
                let overlay = match (p.get(i), u[i] >= 0.5) {
                    (true, true) => WHITE,
                    (true, false) => RED,
                    _ => BLACK,
                };
                img.put(width + 2 + x, y0 + y, overlay);
            }
        }
    }
    Ok(img)
}

pub fn cmd_render_grid(
    noisy: &[Vec<f64>],
    predicted: &[BitVector],
    clean: &[BitVector],
    width: usize,
    height: usize,
    out_path: &Path,
) -> Result<RgbImage> {
    let img = render_grid(noisy, predicted, clean, width, height)?;
    img.write_ppm(fs::File::create(out_path)?)?;
    Ok(img)
}

/// Reads a flat `key=value` file into a map (later keys win).
pub fn read_records(path: &Path) -> Result<BTreeMap<String, String>> {
    Ok(parse_key_values(&fs::read_to_string(path)?, &path.display().to_string())?
        .into_iter()
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn config_round_trips_through_text() {
        let mut c = ExperimentConfig::default();
        c.set("task", "denoise-occlude").unwrap();
        c.set("model", "percloss").unwrap();
        c.set("learning_rate", "2^-4").unwrap();
        c.set("data", "/tmp/x.idx").unwrap();
        assert_eq!(c.learning_rate, 0.0625);
        let mut back = ExperimentConfig::default();
        back.apply_text(&c.to_text(), "mem").unwrap();
        assert_eq!(back, c);
        assert!(c.set("nope", "1").is_err());
        assert!(c.set("epochs", "-1").is_err());
        assert!(c.apply_text("epochs 3", "mem").is_err());
    }

    #[test]
    fn every_key_is_settable_and_recorded() {
        let c = ExperimentConfig {
            data: Some("d".into()),
            ..ExperimentConfig::default()
        };
        let recorded: Vec<String> = c.to_records().into_iter().map(|(k, _)| k).collect();
        assert_eq!(recorded, ExperimentConfig::KEYS);
    }

    #[test]
    fn default_grids() {
        let g = GridSpec::default_for(Task::DenoiseFlip);
        assert_eq!(g.learning_rates.len(), 8);
        assert_eq!(g.learning_rates[0], 1.0);
        assert_eq!(*g.learning_rates.last().unwrap(), 2f64.powi(-14));
        assert_eq!(GridSpec::default_for(Task::Multilabel).learning_rates[0], 2f64.powi(-4));
    }

    #[test]
    fn grid_expansion_skips_unused_dimensions() {
        let g = GridSpec::default_for(Task::Multilabel);
        let count = |m: ModelKind| {
            g.expand(&ExperimentConfig {
                model: m,
                ..ExperimentConfig::default()
            })
            .unwrap()
            .len()
        };
        assert_eq!(count(ModelKind::LogReg), 4);
        assert_eq!(count(ModelKind::Cd), 4 * 4 * 3);
        assert_eq!(count(ModelKind::HashCrbm), 4 * 4 * 3);
        let mut empty = g.clone();
        empty.learning_rates.clear();
        assert!(empty.expand(&ExperimentConfig::default()).is_err());
    }

    #[test]
    fn baseline_metrics() {
        let examples = vec![Example::new(vec![1.0, 1.0, 0.0, 0.0], BitVector::new(vec![1, 0, 1, 0]).unwrap())];
        let m = task_metric(Task::DenoiseFlip, &identity_predictions(&examples), &examples).unwrap();
        assert_eq!(
            m,
            TaskMetric::Denoise(DenoiseErrors {
                all: 50.0,
                changed: 100.0
            })
        );
    }

    #[test]
    fn report_rendering_has_summary_and_table() {
        let mut r = MetricsReport::new(Task::Multilabel, "logreg");
        r.folds.push(TaskMetric::PerLabel(10.0));
        r.folds.push(TaskMetric::PerLabel(20.0));
        let text = r.render();
        assert!(text.contains("mean_error=15.0000"));
        assert!(text.ends_with("fold\terror\n0\t10.0000\n1\t20.0000\n"));
    }

    fn tile(bits: &[u8]) -> BitVector {
        BitVector::new(bits.to_vec()).unwrap()
    }

    fn overlay(img: &RgbImage, row: usize, width: usize, height: usize) -> Vec<[u8; 3]> {
        let y0 = 1 + row * (height + 1);
        (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| img.get(width + 2 + x, y0 + y))
            .collect()
    }

    #[test]
    fn render_colours() {
        let noisy = vec![vec![1.0, 0.0, 1.0, 0.0], vec![0.0; 4]];
        let predicted = vec![tile(&[1, 0, 1, 0]), tile(&[1, 1, 1, 1])];
        let clean = vec![tile(&[1, 1, 0, 0]); 2];
        let img = render_grid(&noisy, &predicted, &clean, 2, 2).unwrap();
        let first = overlay(&img, 0, 2, 2);
        assert!(!first.contains(&RED));
        assert_eq!(first, vec![WHITE, BLACK, WHITE, BLACK]);
        assert!(overlay(&img, 1, 2, 2).iter().all(|&p| p == RED));
        assert_eq!(img.get(1, 1), WHITE);
        assert_eq!(img.get(1, 2), BLACK);
    }

    #[test]
    fn ppm_round_trip() {
        let mut img = RgbImage::new(3, 2, BLACK);
        img.put(2, 1, RED);
        img.put(0, 0, [1, 2, 3]);
        let mut buf = Vec::new();
        img.write_ppm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(RgbImage::read_ppm(Cursor::new(&buf)).unwrap(), img);
        assert!(RgbImage::read_ppm(Cursor::new(&buf[..buf.len() - 1])).is_err());
        assert!(RgbImage::read_ppm(Cursor::new(b"P3\n1 1\n255\n".to_vec())).is_err());
    }
}
