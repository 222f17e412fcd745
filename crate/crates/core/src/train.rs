//! Triplet-loss training with plain SGD, validation early stopping and
//! step decay of the learning rate.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::{EmbeddingModel, SpecTriplet};
use crate::spectrogram::Spectrogram;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub margin: f64,
    pub batch_size: usize,
    pub lr: f64,
    /// Learning-rate multiplier applied after each `decay_every` epochs
    /// without validation improvement.
    pub decay_factor: f64,
    pub decay_every: usize,
    /// Stop after this many epochs without validation improvement.
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// When nonzero, every training triplet is cut to a random window of
    /// this many frames (one offset shared by its three clips) each time it
    /// is visited. Validation always sees whole clips.
    pub crop_frames: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            margin: 0.2,
            batch_size: 8,
            lr: 1e-3,
            decay_factor: 0.9,
            decay_every: 20,
            patience: 50,
            max_epochs: 200,
            seed: 0,
            crop_frames: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin >= 0.0) || self.batch_size == 0 || !(self.lr >= 0.0) {
            return Err(Error::InvalidParameter("need margin >= 0, batch_size >= 1, lr >= 0".into()));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) || self.decay_every == 0 || self.patience == 0 {
            return Err(Error::InvalidParameter("need decay in (0, 1], positive decay interval and patience".into()));
        }
        if self.max_epochs > 0 && self.patience > self.max_epochs {
            return Err(Error::InvalidParameter("patience may not exceed max_epochs".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Validation loss of the untrained model (epoch 0).
    pub initial_val_loss: f64,
    /// 0 when no epoch improved on the initial model.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Epochs after which the learning rate was multiplied by the decay factor.
    pub decay_epochs: Vec<usize>,
    /// Filled in by callers that can read a clock.
    pub wall_time_s: Option<f64>,
}

/// One pass over `triplets` in a seeded random order, with an SGD update
/// per batch. Returns the mean of the batch losses.
pub fn train_epoch(
    model: &mut EmbeddingModel,
    store: &[Spectrogram],
    triplets: &[SpecTriplet],
    cfg: &TrainConfig,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if triplets.is_empty() {
        return Err(Error::InvalidParameter("no training triplets".into()));
    }
    let mut order: Vec<SpecTriplet> = triplets.to_vec();
    order.shuffle(rng);
    let mut total = 0.0;
    let mut batches = 0;
    for batch in order.chunks(cfg.batch_size) {
        let (loss, grad) = if cfg.crop_frames > 0 {
            let (local, local_batch) = crop_batch(store, batch, cfg.crop_frames, rng)?;
            model.loss_and_gradients(&local, &local_batch, cfg.margin)?
        } else {
            model.loss_and_gradients(store, batch, cfg.margin)?
        };
        if lr != 0.0 {
            model.sgd_step(&grad, lr);
        }
        total += loss;
        batches += 1;
    }
    Ok(total / batches as f64)
}

fn window(s: &Spectrogram, offset: usize, frames: usize) -> Result<Spectrogram> {
    let b = s.bands();
    let frames = frames.min(s.frames() - offset);
    Spectrogram::from_values(s.values()[offset * b..(offset + frames) * b].to_vec(), frames, b, s.frame_hop_s(), s.log_floor())
}

fn crop_batch(
    store: &[Spectrogram],
    batch: &[SpecTriplet],
    frames: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Spectrogram>, Vec<SpecTriplet>)> {
    let mut local = Vec::with_capacity(3 * batch.len());
    let mut local_batch = Vec::with_capacity(batch.len());
    for t in batch {
        let shortest = [t.anchor, t.positive, t.negative].iter().map(|&i| store[i].frames()).min().unwrap_or(0);
        let offset = if shortest > frames { rng.gen_range(0..=shortest - frames) } else { 0 };
        let base = local.len();
        for i in [t.anchor, t.positive, t.negative] {
            local.push(window(&store[i], offset, frames)?);
        }
        local_batch.push(SpecTriplet { anchor: base, positive: base + 1, negative: base + 2 });
    }
    Ok((local, local_batch))
}

/// Mean triplet loss; never touches the parameters.
pub fn validate(model: &EmbeddingModel, store: &[Spectrogram], triplets: &[SpecTriplet], margin: f64) -> Result<f64> {
    model.batch_loss(store, triplets, margin)
}

/// Trains until `max_epochs` or until validation loss has not improved for
/// `patience` epochs, and returns the best-validation model.
pub fn fit(
    model: EmbeddingModel,
    store: &[Spectrogram],
    train: &[SpecTriplet],
    val: &[SpecTriplet],
    cfg: &TrainConfig,
) -> Result<(EmbeddingModel, TrainReport)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidParameter("training and validation triplets must be nonempty".into()));
    }
    let initial_val_loss = validate(&model, store, val, cfg.margin)?;
    let mut report = TrainReport {
        epochs: Vec::new(),
        initial_val_loss,
        best_epoch: 0,
        best_val_loss: initial_val_loss,
        decay_epochs: Vec::new(),
        wall_time_s: None,
    };
    let mut best = model.clone();
    let mut current = model;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut lr = cfg.lr;
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        let train_loss = train_epoch(&mut current, store, train, cfg, lr, &mut rng)?;
        let val_loss = validate(&current, store, val, cfg.margin)?;
        report.epochs.push(EpochRecord { epoch, train_loss, val_loss, lr });
        log::info!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6} lr {lr:.3e}");
        if val_loss < report.best_val_loss {
            report.best_val_loss = val_loss;
            report.best_epoch = epoch;
            best = current.clone();
            stale = 0;
            continue;
        }
        stale += 1;
        if stale >= cfg.patience {
            log::info!("early stop after {stale} epochs without improvement");
            break;
        }
        if stale % cfg.decay_every == 0 {
            lr *= cfg.decay_factor;
            report.decay_epochs.push(epoch);
        }
    }
    Ok((best, report))
}
