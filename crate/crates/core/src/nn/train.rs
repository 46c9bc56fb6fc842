//! Adam training loop with validation-based early stopping.
//!
//! Each epoch shuffles the training indices (seeded by epoch number),
//! accumulates gradients example-sequentially over each batch, and applies
//! one bias-corrected Adam update per batch. Validation loss drives a
//! patience counter; when it stops improving for `patience` consecutive
//! epochs training halts, keeping the final weights (no rollback). A
//! non-finite loss aborts with a numerical error naming the epoch.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::layers::softmax_cross_entropy;
use super::model::Cnn;
use crate::{Error, Result};

/// One training record: a flat input matching the model's input length, the
/// class label, and a stratum key (class and SNR bucket) used only for the
/// validation split.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub input: Vec<f64>,
    pub label: usize,
    pub stratum: u32,
}

/// Optimizer and loop hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Fraction of examples held out for validation, stratified.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive and finite"));
        }
        if !(self.beta1 >= 0.0 && self.beta1 < 1.0 && self.beta2 >= 0.0 && self.beta2 < 1.0) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::invalid("batch_size and max_epochs must be positive"));
        }
        if !(self.val_fraction >= 0.0 && self.val_fraction < 1.0) {
            return Err(Error::invalid("val_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// First and second moment estimates, one per parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        AdamState {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    /// One bias-corrected Adam update in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &TrainConfig) {
        debug_assert_eq!(params.len(), grads.len());
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let b1 = cfg.beta1;
        let b2 = cfg.beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Patience counter over validation losses. `observe` returns true when
/// training should stop.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    pub best_epoch: usize,
    epochs_seen: usize,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            epochs_seen: 0,
            since_best: 0,
        }
    }

    pub fn observe(&mut self, val_loss: f64) -> bool {
        self.epochs_seen += 1;
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = self.epochs_seen;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        self.since_best >= self.patience
    }
}

/// Splits example indices into (train, validation) with `val_fraction` of
/// each stratum held out. Strata with a single example stay in training.
/// Deterministic for a seed.
pub fn stratified_val_split(
    strata: &[u32],
    val_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut groups: Vec<(u32, Vec<usize>)> = Vec::new();
    for (i, &s) in strata.iter().enumerate() {
        match groups.iter_mut().find(|(key, _)| *key == s) {
            Some((_, v)) => v.push(i),
            None => groups.push((s, vec![i])),
        }
    }
    groups.sort_by_key(|(key, _)| *key);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (_, mut idx) in groups {
        idx.shuffle(&mut rng);
        let n_val = if idx.len() < 2 {
            0
        } else {
            (((idx.len() as f64) * val_fraction).round() as usize).clamp(1, idx.len() - 1)
        };
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// What the loop did, epoch by epoch.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

fn mean_loss(model: &Cnn, examples: &[TrainExample], idx: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &i in idx {
        let cache = model.forward(&examples[i].input)?;
        total += softmax_cross_entropy(&cache.logits, examples[i].label).0;
    }
    Ok(total / idx.len() as f64)
}

/// Trains the model in place. With `val_fraction = 0` (or too few examples
/// to hold any out) the loop runs all `max_epochs` without early stopping.
pub fn train(model: &mut Cnn, examples: &[TrainExample], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::invalid("no training examples"));
    }
    let input_len = model.cfg.input_len();
    for (i, ex) in examples.iter().enumerate() {
        if ex.input.len() != input_len {
            return Err(Error::Shape {
                expected: format!("{input_len}"),
                got: format!("{}", ex.input.len()),
                context: "training example input",
            });
        }
        if ex.label >= model.cfg.num_classes {
            return Err(Error::invalid(format!(
                "example {i} has label {} but the model has {} classes",
                ex.label, model.cfg.num_classes
            )));
        }
    }

    let strata: Vec<u32> = examples.iter().map(|e| e.stratum).collect();
    let (train_idx, val_idx) = stratified_val_split(&strata, cfg.val_fraction, cfg.seed);
    let (train_idx, val_idx) = if train_idx.is_empty() {
        (val_idx, train_idx)
    } else {
        (train_idx, val_idx)
    };

    let mut adam = AdamState::new(model.param_count());
    let mut stopper = EarlyStopping::new(cfg.patience.max(1));
    let mut report = TrainReport {
        epochs_run: 0,
        train_losses: Vec::new(),
        val_losses: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };

    let mut order = train_idx.clone();
    let mut grads_sum = vec![0.0f64; model.param_count()];
    for epoch in 1..=cfg.max_epochs {
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            for g in grads_sum.iter_mut() {
                *g = 0.0;
            }
            let mut batch_loss = 0.0;
            for &i in batch {
                let ex = &examples[i];
                let cache = model.forward(&ex.input)?;
                // The cross-entropy clamp hides overflowed logits, so check
                // them directly: this is where divergence first shows up.
                if cache.logits.iter().any(|z| !z.is_finite()) {
                    return Err(Error::numerical(format!(
                        "non-finite logits at epoch {epoch}"
                    )));
                }
                let (loss, _, dlogits) = softmax_cross_entropy(&cache.logits, ex.label);
                if !loss.is_finite() {
                    return Err(Error::numerical(format!(
                        "non-finite loss at epoch {epoch}"
                    )));
                }
                batch_loss += loss;
                let grads = model.backward(&cache, &dlogits);
                for (s, g) in grads_sum.iter_mut().zip(&grads) {
                    *s += g;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for g in grads_sum.iter_mut() {
                *g *= inv;
            }
            adam.step(&mut model.params, &grads_sum, cfg);
            epoch_loss += batch_loss;
        }
        report.epochs_run = epoch;
        report.train_losses.push(epoch_loss / order.len() as f64);

        if val_idx.is_empty() {
            report.val_losses.push(f64::NAN);
            continue;
        }
        let val_loss = mean_loss(model, examples, &val_idx)?;
        if !val_loss.is_finite() {
            return Err(Error::numerical(format!(
                "non-finite validation loss at epoch {epoch}"
            )));
        }
        report.val_losses.push(val_loss);
        if stopper.observe(val_loss) {
            report.stopped_early = true;
            break;
        }
    }
    report.best_epoch = if val_idx.is_empty() {
        report.epochs_run
    } else {
        stopper.best_epoch
    };
    Ok(report)
}
