//! Seeded training runs over a split x repeat grid, with metrics taken at
//! the best validation epoch, a CSV ledger and JSON reports.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use splab_core::{prox, Dataset, Split, Task};

use crate::batch::{Batch, GraphStructure};
use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::model::{InputEncoding, Model, ModelConfig, ModelError, ModelKind};
use crate::params::{apply_bn_stats, Adam, Pass};
use crate::pooling::PoolMode;
use crate::tape::Var;

/// Running-average momentum for batch-norm statistics.
pub const BN_MOMENTUM: f64 = 0.9;
/// Fractions of graphs used for training and validation; the rest is test.
pub const TRAIN_FRACTION: f64 = 0.8;
pub const VALID_FRACTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error(transparent)]
    Data(#[from] splab_core::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("i/o error on {path}: {msg}")]
    Io { path: String, msg: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    Jsonl,
    Tu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: DatasetFormat,
}

fn default_format() -> DatasetFormat {
    DatasetFormat::Jsonl
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset, ExperimentError> {
        Ok(match self.format {
            DatasetFormat::Jsonl => splab_core::io::read_jsonl_file(&self.path)?,
            DatasetFormat::Tu => splab_core::io::parse_tu_dataset(&self.path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: Option<DatasetSource>,
    pub model: ModelKind,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default = "default_pooling")]
    pub pooling: PoolMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_splits")]
    pub splits: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "one")]
    pub workers: usize,
    /// CSV file that receives one row per run.
    #[serde(default)]
    pub ledger: Option<PathBuf>,
    /// Directory for JSON reports.
    #[serde(default)]
    pub report_dir: Option<PathBuf>,
    /// Directory for best-validation checkpoints.
    #[serde(default)]
    pub checkpoint_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}
fn default_layers() -> usize {
    2
}
fn default_dim() -> usize {
    64
}
fn default_lr() -> f64 {
    1e-3
}
fn default_batch_size() -> usize {
    32
}
fn default_epochs() -> usize {
    200
}
fn default_dropout() -> f64 {
    0.5
}
fn default_pooling() -> PoolMode {
    PoolMode::LayerwiseMean
}
fn default_splits() -> usize {
    10
}
fn default_repeats() -> usize {
    3
}

impl ExperimentConfig {
    /// Full-protocol defaults: 200 epochs, 10 splits x 3 repeats.
    pub fn new(model: ModelKind, k: usize, layers: usize) -> Self {
        Self {
            dataset: None,
            model,
            k: if model.is_baseline() { 1 } else { k },
            layers,
            dim: default_dim(),
            lr: default_lr(),
            batch_size: default_batch_size(),
            epochs: default_epochs(),
            dropout: default_dropout(),
            pooling: default_pooling(),
            seed: 0,
            splits: default_splits(),
            repeats: default_repeats(),
            workers: 1,
            ledger: None,
            report_dir: None,
            checkpoint_dir: None,
        }
    }

    /// Desk-scale preset: 50 epochs, 3 splits x 2 repeats.
    pub fn desk(model: ModelKind, k: usize, layers: usize) -> Self {
        Self {
            epochs: 50,
            splits: 3,
            repeats: 2,
            ..Self::new(model, k, layers)
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(vec![e.to_string()]))
    }

    /// Every violated constraint at once.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("k", self.k),
            ("layers", self.layers),
            ("dim", self.dim),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("splits", self.splits),
            ("repeats", self.repeats),
            ("workers", self.workers),
        ] {
            if v == 0 {
                out.push(format!("{name} must be positive"));
            }
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            out.push(format!("lr {} must be positive", self.lr));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            out.push(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.model.is_baseline() && self.k != 1 {
            out.push(format!("{} uses direct edges only, k must be 1", self.model.name()));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Config(p))
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Model shape for a dataset: input encoding, relation count and output
    /// width come from the data.
    pub fn model_config(&self, dataset: &Dataset) -> ModelConfig {
        let input = match dataset.graphs.first().and_then(|g| g.features.as_ref()) {
            Some(f) => InputEncoding::Features {
                dim: f.first().map_or(1, |r| r.len()),
            },
            None => InputEncoding::Colors {
                count: dataset.color_count().max(1),
            },
        };
        let mut cfg = ModelConfig::new(self.model, input, self.dim, self.layers, self.k, dataset.task.output_dim());
        cfg.relations = dataset.relation_count().max(1);
        cfg.pooling = self.pooling;
        cfg.dropout = self.dropout;
        cfg
    }
}

/// `count` random 80/10/10 partitions; they depend only on `seed`, so every
/// model sees the same splits.
pub fn random_splits(n: usize, count: usize, seed: u64) -> Vec<Split> {
    grouped_splits(n, 1, count, seed)
}

/// Like [`random_splits`], but consecutive blocks of `group` graphs always
/// land in the same part.
pub fn grouped_splits(n: usize, group: usize, count: usize, seed: u64) -> Vec<Split> {
    assert!(group > 0, "group size must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = n.div_ceil(group);
    // Validation and test keep at least one block each when there are three.
    let floor = usize::from(blocks >= 3);
    let n_valid = ((blocks as f64 * VALID_FRACTION).round() as usize).max(floor);
    let n_test = ((blocks as f64 * (1.0 - TRAIN_FRACTION - VALID_FRACTION)).round() as usize).max(floor);
    let n_train = blocks.saturating_sub(n_valid + n_test);
    let expand = |ids: &[usize]| -> Vec<usize> {
        ids.iter().flat_map(|&b| b * group..((b + 1) * group).min(n)).collect()
    };
    (0..count)
        .map(|_| {
            let mut ids: Vec<usize> = (0..blocks).collect();
            ids.shuffle(&mut rng);
            let test = ids.split_off((n_train + n_valid).min(blocks));
            let valid = ids.split_off(n_train.min(ids.len()));
            Split {
                train: expand(&ids),
                valid: expand(&valid),
                test: expand(&test),
            }
        })
        .collect()
}

/// Splits stored with the dataset when present, random ones otherwise.
/// Proximity datasets are split pair by pair.
pub fn experiment_splits(dataset: &Dataset, count: usize, seed: u64) -> Result<Vec<Split>, ExperimentError> {
    if dataset.splits.is_empty() {
        // Twin graphs of a proximity pair differ in one edge; keep them together.
        let group = if prox::spec_of(dataset).is_some() { 2 } else { 1 };
        return Ok(grouped_splits(dataset.len(), group, count, seed));
    }
    if dataset.splits.len() < count {
        return Err(ExperimentError::Config(vec![format!(
            "dataset carries {} splits, {count} requested",
            dataset.splits.len()
        )]));
    }
    for s in &dataset.splits[..count] {
        s.check(dataset.len())?;
    }
    Ok(dataset.splits[..count].to_vec())
}

fn run_seed(seed: u64, split: usize, repeat: usize) -> u64 {
    let mut x = seed ^ ((split as u64) << 32 | repeat as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x ^= x >> 31;
    x.wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub valid_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub split: usize,
    pub repeat: usize,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the lowest validation loss.
    pub best_epoch: usize,
    pub test_loss: f64,
    /// Accuracy for classification, MAE for regression.
    pub test_metric: f64,
    pub wall_seconds: f64,
    /// Softmaxed hop weights after each epoch, per layer.
    pub alphas: Vec<Vec<Vec<f64>>>,
}

/// State passed to the per-step hook after each optimizer update.
#[derive(Debug, Clone)]
pub struct StepInfo<'a> {
    pub split: usize,
    pub repeat: usize,
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub model: &'a Model,
}

pub type StepHook<'h> = &'h (dyn Fn(&StepInfo) + Sync);

/// Mean loss and metric over a set of graphs, evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub metric: f64,
    pub count: usize,
}

fn loss_of(pass: &mut Pass, out: Var, batch: &Batch, task: Task) -> Var {
    if task.is_classification() {
        let t = batch.class_targets().expect("class labels on every graph");
        pass.tape.cross_entropy(out, Rc::new(t))
    } else {
        let t = batch.regression_targets().expect("regression targets on every graph");
        pass.tape.mse(out, Rc::new(t))
    }
}

/// Sum of the per-graph metric over a batch: correct predictions or
/// absolute errors averaged over targets.
fn metric_sum(pass: &Pass, out: Var, batch: &Batch, task: Task) -> f64 {
    let y = pass.tape.value(out);
    if task.is_classification() {
        let t = batch.class_targets().expect("class labels");
        y.rows()
            .into_iter()
            .zip(t)
            .filter(|(row, c)| {
                let best = row
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
                best.0 == *c
            })
            .count() as f64
    } else {
        let t = batch.regression_targets().expect("targets");
        let cols = t.ncols().max(1) as f64;
        (y - &t).mapv(f64::abs).sum() / cols
    }
}

pub const EVAL_BATCH: usize = 128;

pub fn evaluate(model: &Model, structures: &[GraphStructure], ids: &[usize], task: Task) -> Evaluation {
    let mut loss = 0.0;
    let mut metric = 0.0;
    for chunk in ids.chunks(EVAL_BATCH) {
        let refs: Vec<&GraphStructure> = chunk.iter().map(|&i| &structures[i]).collect();
        let batch = Batch::new(&refs);
        let mut pass = Pass::new(&model.store, false, 0);
        let out = model.forward(&mut pass, &batch);
        let l = loss_of(&mut pass, out, &batch, task);
        loss += pass.tape.scalar(l) * chunk.len() as f64;
        metric += metric_sum(&pass, out, &batch, task);
    }
    let count = ids.len();
    let denom = count.max(1) as f64;
    Evaluation {
        loss: loss / denom,
        metric: metric / denom,
        count,
    }
}

pub fn build_structures(dataset: &Dataset, config: &ModelConfig) -> Vec<GraphStructure> {
    let needs = config.needs();
    dataset.graphs.iter().map(|g| GraphStructure::build(g, &needs)).collect()
}

/// One training run; returns the result and the best-validation model.
#[allow(clippy::too_many_arguments)]
pub fn train_run(
    cfg: &ExperimentConfig,
    model_cfg: &ModelConfig,
    task: Task,
    structures: &[GraphStructure],
    split: &Split,
    split_index: usize,
    repeat: usize,
    hook: Option<StepHook>,
) -> Result<(RunResult, Model), ExperimentError> {
    let start = Instant::now();
    let seed = run_seed(cfg.seed, split_index, repeat);
    let mut model = Model::new(model_cfg.clone(), seed)?;
    let mut adam = Adam::new(&model.store, cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut order = split.train.clone();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut alphas = Vec::new();
    let mut best: Option<(f64, usize, Evaluation, Model)> = None;
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let refs: Vec<&GraphStructure> = chunk.iter().map(|&i| &structures[i]).collect();
            let batch = Batch::new(&refs);
            let (loss, grads, stats) = {
                let mut pass = Pass::new(&model.store, true, seed.wrapping_add(step as u64 + 1));
                let out = model.forward(&mut pass, &batch);
                let l = loss_of(&mut pass, out, &batch, task);
                let g = pass.tape.backward(l);
                let grads = pass.param_grads(&g);
                (pass.tape.scalar(l), grads, pass.take_bn_stats())
            };
            adam.step(&mut model.store, &grads);
            apply_bn_stats(&mut model.store, &stats, BN_MOMENTUM);
            total += loss * chunk.len() as f64;
            if let Some(h) = hook {
                h(&StepInfo {
                    split: split_index,
                    repeat,
                    epoch,
                    step,
                    loss,
                    model: &model,
                });
            }
            step += 1;
        }
        let valid = evaluate(&model, structures, &split.valid, task);
        epochs.push(EpochRecord {
            epoch,
            train_loss: total / order.len().max(1) as f64,
            valid_loss: valid.loss,
            valid_metric: valid.metric,
        });
        if model.config.kind.has_hop_weights() {
            alphas.push(model.alphas()?);
        }
        if best.as_ref().is_none_or(|b| valid.loss < b.0) {
            let test = evaluate(&model, structures, &split.test, task);
            best = Some((valid.loss, epoch, test, model.clone()));
        }
    }
    let (_, best_epoch, test, best_model) = best.expect("at least one epoch");
    Ok((
        RunResult {
            split: split_index,
            repeat,
            seed,
            epochs,
            best_epoch,
            test_loss: test.loss,
            test_metric: test.metric,
            wall_seconds: start.elapsed().as_secs_f64(),
            alphas,
        },
        best_model,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub model: ModelConfig,
    pub task: Task,
    /// `accuracy` or `mae`.
    pub metric: String,
    pub splits: Vec<Split>,
    pub runs: Vec<RunResult>,
    /// Test metric per split, averaged over repeats.
    pub per_split: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len().max(1) as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

const LEDGER_HEADER: [&str; 14] = [
    "config_hash",
    "model",
    "k",
    "layers",
    "dim",
    "split",
    "repeat",
    "seed",
    "best_epoch",
    "test_loss",
    "test_metric",
    "metric",
    "wall_seconds",
    "config",
];

fn append_ledger(path: &Path, cfg: &ExperimentConfig, hash: &str, metric: &str, r: &RunResult) -> Result<(), ExperimentError> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(LEDGER_HEADER).map_err(|e| io_err(path, e))?;
    }
    w.write_record([
        hash.to_string(),
        cfg.model.name().to_string(),
        cfg.k.to_string(),
        cfg.layers.to_string(),
        cfg.dim.to_string(),
        r.split.to_string(),
        r.repeat.to_string(),
        r.seed.to_string(),
        r.best_epoch.to_string(),
        r.test_loss.to_string(),
        r.test_metric.to_string(),
        metric.to_string(),
        format!("{:.3}", r.wall_seconds),
        serde_json::to_string(cfg).expect("config serializes"),
    ])
    .map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), ExperimentError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Loads the configured dataset and runs the full grid.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    let source = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| ExperimentError::Config(vec!["dataset is required".to_string()]))?;
    let dataset = source.load()?;
    run_on_dataset(cfg, &dataset, None)
}

/// Runs the split x repeat grid on `dataset`, fanning runs out over
/// `cfg.workers` threads. Results are ordered by (split, repeat).
pub fn run_on_dataset(cfg: &ExperimentConfig, dataset: &Dataset, hook: Option<StepHook>) -> Result<Report, ExperimentError> {
    let mut problems = cfg.problems();
    if dataset.is_empty() {
        problems.push("dataset has no graphs".to_string());
    }
    if !problems.is_empty() {
        return Err(ExperimentError::Config(problems));
    }
    let model_cfg = cfg.model_config(dataset);
    let p = model_cfg.problems();
    if !p.is_empty() {
        return Err(ExperimentError::Config(p));
    }
    let splits = experiment_splits(dataset, cfg.splits, cfg.seed)?;
    let structures = build_structures(dataset, &model_cfg);
    let hash = cfg.hash();
    let metric = if dataset.task.is_classification() { "accuracy" } else { "mae" };
    for dir in [&cfg.report_dir, &cfg.checkpoint_dir].into_iter().flatten() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let jobs: Vec<(usize, usize)> = (0..cfg.splits).flat_map(|s| (0..cfg.repeats).map(move |r| (s, r))).collect();
    let next = AtomicUsize::new(0);
    let ledger = Mutex::new(());
    let results: Mutex<Vec<Option<Result<RunResult, ExperimentError>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let worker = || loop {
        let j = next.fetch_add(1, Ordering::SeqCst);
        let Some(&(s, r)) = jobs.get(j) else { break };
        let outcome = train_run(cfg, &model_cfg, dataset.task, &structures, &splits[s], s, r, hook).and_then(
            |(run, best)| {
                if let Some(dir) = &cfg.checkpoint_dir {
                    let meta = serde_json::json!({"config_hash": hash, "split": s, "repeat": r, "best_epoch": run.best_epoch});
                    Checkpoint::from_model(&best, meta).save(dir.join(format!("{hash}-s{s}-r{r}.ckpt.json")))?;
                }
                if let Some(dir) = &cfg.report_dir {
                    write_json(&dir.join(format!("{hash}-s{s}-r{r}.json")), &run)?;
                }
                if let Some(path) = &cfg.ledger {
                    let _guard = ledger.lock().expect("ledger lock");
                    append_ledger(path, cfg, &hash, metric, &run)?;
                }
                Ok(run)
            },
        );
        results.lock().expect("results lock")[j] = Some(outcome);
    };
    std::thread::scope(|scope| {
        for _ in 0..cfg.workers.min(jobs.len()) {
            scope.spawn(worker);
        }
    });
    let mut runs = Vec::with_capacity(jobs.len());
    for r in results.into_inner().expect("results lock") {
        runs.push(r.expect("every job ran")?);
    }
    let per_split: Vec<f64> = (0..cfg.splits)
        .map(|s| {
            let xs: Vec<f64> = runs.iter().filter(|r| r.split == s).map(|r| r.test_metric).collect();
            mean_std(&xs).0
        })
        .collect();
    let (mean, std) = mean_std(&per_split);
    let report = Report {
        config: cfg.clone(),
        config_hash: hash.clone(),
        model: model_cfg,
        task: dataset.task,
        metric: metric.to_string(),
        splits,
        runs,
        per_split,
        mean,
        std,
    };
    if let Some(dir) = &cfg.report_dir {
        write_json(&dir.join(format!("{hash}.json")), &report)?;
    }
    Ok(report)
}
