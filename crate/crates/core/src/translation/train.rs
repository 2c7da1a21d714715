use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::loss::contrastive_batch_loss;
use super::tower::{TowerGrads, TowerParams};
use super::{TranslationModel, HIDDEN_DIM, JOINT_DIM};
use crate::error::{Error, Result};
use crate::store::PairedDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub patience_epochs: usize,
    pub max_epochs: usize,
    /// Tail of the shuffled pair list held out for early stopping.
    pub val_fraction: f64,
    pub rng_seed: u64,
    pub hidden_dim: usize,
    pub out_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 4096,
            margin: 1.0,
            learning_rate: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            patience_epochs: 5,
            max_epochs: 200,
            val_fraction: 0.1,
            rng_seed: 0,
            hidden_dim: HIDDEN_DIM,
            out_dim: JOINT_DIM,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin <= 2.0) {
            return Err(Error::Config(format!("margin must lie in (0, 2], got {}", self.margin)));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!("val fraction must lie in (0, 1), got {}", self.val_fraction)));
        }
        if self.patience_epochs == 0 {
            return Err(Error::Config("patience must be at least one epoch".into()));
        }
        if self.hidden_dim == 0 || self.out_dim == 0 {
            return Err(Error::Config("tower widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopped,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Validation loss of the initialized model, before any update.
    pub initial_val_loss: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned; 0 means the initialization.
    pub best_epoch: usize,
    pub stop_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> f64 {
        self.epochs
            .iter()
            .find(|r| r.epoch == self.best_epoch)
            .map_or(self.initial_val_loss, |r| r.val_loss)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = csv::Writer::from_path(path)?;
        for record in &self.epochs {
            out.serialize(record)?;
        }
        if self.epochs.is_empty() {
            out.write_record(["epoch", "train_loss", "val_loss"])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Patience-based stopping on validation loss; strictly lower counts as an improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            since_best: 0,
        }
    }

    /// Records an epoch; returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> (bool, bool) {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.since_best = 0;
            (true, false)
        } else {
            self.since_best += 1;
            (false, self.since_best >= self.patience)
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Gradients for every parameter of both towers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub audio: TowerGrads,
    pub image: TowerGrads,
}

/// Full forward and backward pass for one batch of aligned pre-trained rows.
pub fn batch_loss_and_grads(
    model: &TranslationModel,
    audio_x: &[f64],
    image_x: &[f64],
    batch: usize,
    margin: f64,
) -> Result<(f64, ModelGrads)> {
    let act_a = model.audio.forward_batch(audio_x, batch);
    let act_v = model.image.forward_batch(image_x, batch);
    let out = contrastive_batch_loss(&act_a.out, &act_v.out, batch, model.out_dim(), margin)?;
    let audio = model.audio.backward(audio_x, batch, &act_a, &out.grad_audio);
    let image = model.image.backward(image_x, batch, &act_v, &out.grad_image);
    Ok((out.loss, ModelGrads { audio, image }))
}

fn batch_loss(model: &TranslationModel, audio_x: &[f64], image_x: &[f64], batch: usize, margin: f64) -> Result<f64> {
    let a = model.audio.forward_batch(audio_x, batch);
    let v = model.image.forward_batch(image_x, batch);
    Ok(contrastive_batch_loss(&a.out, &v.out, batch, model.out_dim(), margin)?.loss)
}

/// Consecutive batches; a trailing singleton joins the previous batch.
fn batch_ranges(n: usize, batch_size: usize) -> Vec<Range<usize>> {
    let mut ranges: Vec<Range<usize>> = (0..n)
        .step_by(batch_size)
        .map(|s| s..(s + batch_size).min(n))
        .collect();
    if ranges.len() > 1 && ranges.last().is_some_and(|r| r.len() < 2) {
        let tail = ranges.pop().unwrap();
        ranges.last_mut().unwrap().end = tail.end;
    }
    ranges
}

struct PairRows {
    audio: Vec<f64>,
    image: Vec<f64>,
    audio_dim: usize,
    image_dim: usize,
}

impl PairRows {
    fn gather(&self, order: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut a = Vec::with_capacity(order.len() * self.audio_dim);
        let mut v = Vec::with_capacity(order.len() * self.image_dim);
        for &i in order {
            a.extend_from_slice(&self.audio[i * self.audio_dim..(i + 1) * self.audio_dim]);
            v.extend_from_slice(&self.image[i * self.image_dim..(i + 1) * self.image_dim]);
        }
        (a, v)
    }

    /// Size-weighted mean loss over fixed batches of `order`.
    fn mean_loss(&self, model: &TranslationModel, order: &[usize], batch_size: usize, margin: f64) -> Result<f64> {
        let mut total = 0.0;
        for range in batch_ranges(order.len(), batch_size) {
            let (a, v) = self.gather(&order[range.clone()]);
            total += batch_loss(model, &a, &v, range.len(), margin)? * range.len() as f64;
        }
        Ok(total / order.len() as f64)
    }
}

/// Trains both towers on clip-paired embeddings. Labels are never read.
///
/// The pair list is shuffled once with `rng_seed`; its last `val_fraction`
/// is the validation set. Training batches are reshuffled every epoch. The
/// parameters with the lowest validation loss are returned.
pub fn train_translation(pairs: &PairedDataset<'_>, cfg: &TrainConfig) -> Result<(TranslationModel, TrainHistory)> {
    cfg.validate()?;
    let n = pairs.len();
    let n_val = ((n as f64) * cfg.val_fraction).round() as usize;
    if n_val < 2 || n - n_val < 2 {
        return Err(Error::Config(format!(
            "{n} pairs cannot be split into training and validation sets of at least 2 pairs"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let (audio_dim, image_dim) = (pairs.audio.dim(), pairs.image.dim());
    let mut model = TranslationModel {
        audio: TowerParams::glorot(audio_dim, cfg.hidden_dim, cfg.out_dim, &mut rng),
        image: TowerParams::glorot(image_dim, cfg.hidden_dim, cfg.out_dim, &mut rng),
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let rows = PairRows {
        audio: order
            .iter()
            .flat_map(|&p| pairs.audio.row(pairs.pairs[p].0).iter().map(|&v| v as f64))
            .collect(),
        image: order
            .iter()
            .flat_map(|&p| pairs.image.row(pairs.pairs[p].1).iter().map(|&v| v as f64))
            .collect(),
        audio_dim,
        image_dim,
    };
    let val: Vec<usize> = (n - n_val..n).collect();
    let mut train: Vec<usize> = (0..n - n_val).collect();

    let initial_val_loss = rows.mean_loss(&model, &val, cfg.batch_size, cfg.margin)?;
    let mut history = TrainHistory {
        initial_val_loss,
        epochs: Vec::new(),
        best_epoch: 0,
        stop_epoch: 0,
        stop_reason: StopReason::MaxEpochs,
    };
    if !initial_val_loss.is_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            batch: 0,
            loss: initial_val_loss,
        });
    }

    let shapes: Vec<usize> = model
        .audio
        .tensors()
        .iter()
        .chain(model.image.tensors().iter())
        .map(|t| t.len())
        .collect();
    let mut adam = Adam::new(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, &shapes);
    let mut stopper = EarlyStopping::new(cfg.patience_epochs);
    stopper.observe(0, initial_val_loss);
    let mut best = model.clone();

    for epoch in 1..=cfg.max_epochs {
        train.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, range) in batch_ranges(train.len(), cfg.batch_size).into_iter().enumerate() {
            let (a, v) = rows.gather(&train[range.clone()]);
            let (loss, grads) = batch_loss_and_grads(&model, &a, &v, range.len(), cfg.margin)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch, loss });
            }
            total += loss * range.len() as f64;
            let [aw1, ab1, aw2, ab2] = model.audio.tensors_mut();
            let [iw1, ib1, iw2, ib2] = model.image.tensors_mut();
            let g: Vec<&[f64]> = grads.audio.tensors().into_iter().chain(grads.image.tensors()).collect();
            adam.step(&mut [aw1, ab1, aw2, ab2, iw1, ib1, iw2, ib2], &g);
        }
        let train_loss = total / train.len() as f64;
        let val_loss = rows.mean_loss(&model, &val, cfg.batch_size, cfg.margin)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: 0,
                loss: val_loss,
            });
        }
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        history.stop_epoch = epoch;

        let (improved, stop) = stopper.observe(epoch, val_loss);
        if improved {
            best.clone_from(&model);
        }
        if stop {
            history.stop_reason = StopReason::EarlyStopped;
            break;
        }
    }
    history.best_epoch = stopper.best_epoch();
    Ok((best, history))
}
