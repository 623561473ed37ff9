//! Run configuration and the epoch loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{generate_windows, Dataset, FilterConfig, NegativeSampler, TrainWindow};
use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::model::{CosRecConfig, CosRecModel, Variant};
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Ml1m,
    Gowalla,
}

impl DatasetKind {
    pub fn default_dim(self) -> usize {
        match self {
            DatasetKind::Ml1m => 50,
            DatasetKind::Gowalla => 100,
        }
    }

    pub fn default_filter(self) -> FilterConfig {
        match self {
            DatasetKind::Ml1m => FilterConfig::MOVIELENS,
            DatasetKind::Gowalla => FilterConfig::GOWALLA,
        }
    }
}

pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_BATCH: usize = 512;
pub const DEFAULT_NEGATIVES: usize = 3;
pub const DEFAULT_PATIENCE: usize = 5;
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.1;

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetKind,
    /// Dataset file the run was trained on, informational.
    pub data_path: Option<String>,
    pub dim: usize,
    pub markov_order: usize,
    pub horizon: usize,
    pub negatives: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub block_channels: [usize; 2],
    pub epochs: usize,
    pub seed: u64,
    pub variant: Variant,
    pub first_kernel: usize,
    /// Epochs without validation improvement before stopping; 0 never stops.
    pub patience: usize,
    /// Share of each training portion held out for validation; 0 disables
    /// validation and early stopping.
    pub validation_fraction: f64,
}

impl RunConfig {
    pub fn new(dataset: DatasetKind) -> Self {
        let model = CosRecConfig::new(1, 1, dataset.default_dim());
        Self {
            dataset,
            data_path: None,
            dim: model.dim,
            markov_order: model.markov_order,
            horizon: model.horizon,
            negatives: DEFAULT_NEGATIVES,
            batch_size: DEFAULT_BATCH,
            learning_rate: AdamConfig::default().learning_rate,
            weight_decay: 0.0,
            dropout: model.dropout,
            block_channels: model.block_channels,
            epochs: DEFAULT_EPOCHS,
            seed: 0,
            variant: model.variant,
            first_kernel: model.kernels[0],
            patience: DEFAULT_PATIENCE,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
        }
    }

    pub fn model_config(&self, num_users: usize, num_items: usize) -> Result<CosRecConfig> {
        let mut c = CosRecConfig::new(num_users, num_items, self.dim);
        c.markov_order = self.markov_order;
        c.horizon = self.horizon;
        c.dropout = self.dropout;
        c.block_channels = self.block_channels;
        c.variant = self.variant;
        let c = c.with_first_kernel(self.first_kernel);
        c.validate()?;
        Ok(c)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, weight_decay: self.weight_decay, ..AdamConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.negatives == 0 {
            return Err(Error::Config("batch size and negative rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!("validation fraction {} outside [0, 1)", self.validation_fraction)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-batch loss.
    pub loss: f64,
    pub batches: usize,
    pub val_map: Option<f64>,
    pub val_prec1: Option<f64>,
    pub val_recall10: Option<f64>,
}

impl EpochRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("epoch record serializes")
    }
}

pub struct TrainOutcome<S> {
    /// Best model by validation MAP, or the final one without validation.
    pub model: CosRecModel<S>,
    /// Optimizer state belonging to `model`.
    pub optimizer: Adam<S>,
    /// Generator state at the end of the run.
    pub rng: ChaCha8Rng,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

/// Trains `model` on `dataset`'s training portions. `on_epoch` sees every
/// record as soon as it exists; an error from it aborts the run.
pub fn train<S: Scalar>(
    mut model: CosRecModel<S>,
    dataset: &Dataset,
    run: &RunConfig,
    mut on_epoch: impl FnMut(&EpochRecord) -> Result<()>,
) -> Result<TrainOutcome<S>> {
    run.validate()?;
    let cfg = model.config().clone();
    if cfg.num_items != dataset.num_items || cfg.num_users != dataset.num_users {
        return Err(Error::Config(format!(
            "model sized for {} users / {} items, dataset has {} / {}",
            cfg.num_users, cfg.num_items, dataset.num_users, dataset.num_items
        )));
    }
    let validating = run.validation_fraction > 0.0;
    let fit = if validating { dataset.validation_split(run.validation_fraction) } else { dataset.clone() };
    let windows = generate_windows(&fit, cfg.markov_order, cfg.horizon);
    if windows.is_empty() {
        return Err(Error::Config("no training windows; sequences are too short".into()));
    }
    let sampler = NegativeSampler::new(&fit, run.negatives);
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let mut adam = Adam::new(run.adam(), model.parameters().into_iter().map(|(_, t)| t));

    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, CosRecModel<S>, Adam<S>)> = None;
    let mut since_best = 0;
    let mut batch: Vec<TrainWindow> = Vec::with_capacity(run.batch_size);
    let mut negatives = Vec::new();

    for epoch in 1..=run.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(run.batch_size).enumerate() {
            // batch statistics need two samples; a lone trailing window waits
            // for the next epoch's shuffle
            if chunk.len() < 2 && b > 0 {
                continue;
            }
            batch.clear();
            negatives.clear();
            for &i in chunk {
                batch.push(windows[i].clone());
                negatives.extend(sampler.sample(&windows[i], &mut rng)?);
            }
            let (loss, grads) = model.loss_and_backward(&batch, &negatives, &mut rng)?;
            let loss = loss.as_f64();
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss {loss} at epoch {epoch}, batch {}", b + 1)));
            }
            adam.step(&mut model.parameters_mut(), &grads.tensors)?;
            total += loss;
            batches += 1;
        }

        let mut record = EpochRecord {
            epoch,
            loss: total / batches.max(1) as f64,
            batches,
            val_map: None,
            val_prec1: None,
            val_recall10: None,
        };
        let mut stop = false;
        if validating {
            let report = evaluate(&model, &fit, 1)?;
            if report.users > 0 {
                record.val_map = Some(report.map);
                record.val_prec1 = Some(report.precision[0]);
                record.val_recall10 = Some(report.recall[2]);
                if best.as_ref().is_none_or(|(m, ..)| report.map > *m) {
                    best = Some((report.map, epoch, model.clone(), adam.clone()));
                    since_best = 0;
                } else {
                    since_best += 1;
                    stop = run.patience > 0 && since_best >= run.patience;
                }
            }
        }
        on_epoch(&record)?;
        history.push(record);
        if stop {
            break;
        }
    }

    let (model, optimizer, best_epoch) = match best {
        Some((_, epoch, m, a)) => (m, a, Some(epoch)),
        None => (model, adam, None),
    };
    Ok(TrainOutcome { model, optimizer, rng, history, best_epoch })
}
