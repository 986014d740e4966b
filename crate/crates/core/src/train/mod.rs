//! Mini-batch first-order fitting of a [`MixtureModel`].
//!
//! The objective is the penalized mean negative log-likelihood. Each epoch
//! reshuffles the training rows, steps the optimizer once per mini-batch
//! (the last, possibly short, batch is kept), then evaluates the full
//! training and validation losses. Early stopping watches the validation
//! loss, or the training loss when there is no validation set.

mod optimizer;

pub use optimizer::{optimizer_step, OptimizerConfig, OptimizerState};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::MixtureModel;

const SPLIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

/// The `"train"` object of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub validation_split: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_early_stopping")]
    pub early_stopping: bool,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_epochs() -> usize {
    1000
}
fn default_batch_size() -> usize {
    32
}
fn default_patience() -> usize {
    100
}
fn default_early_stopping() -> bool {
    true
}
fn default_seed() -> u64 {
    42
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerConfig::rmsprop(0.01),
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            validation_split: 0.1,
            patience: default_patience(),
            early_stopping: default_early_stopping(),
            seed: default_seed(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_split) {
            return Err(Error::Config(format!(
                "validation_split must lie in [0, 1), got {}",
                self.validation_split
            )));
        }
        Ok(())
    }
}

/// Loss traces of one run. Epochs are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub train_loss: Vec<f64>,
    /// Empty when the run had no validation rows.
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    /// Which trace early stopping watched: `"val_loss"` or `"train_loss"`.
    pub monitor: String,
    /// Optimizer with every hyperparameter spelled out.
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub n_train: usize,
    pub n_validation: usize,
}

impl History {
    pub fn final_train_loss(&self) -> f64 {
        self.train_loss.last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_val_loss(&self) -> Option<f64> {
        self.val_loss.last().copied()
    }

    /// The monitored loss at `best_epoch`.
    pub fn best_loss(&self) -> f64 {
        let trace = if self.val_loss.is_empty() { &self.train_loss } else { &self.val_loss };
        trace[self.best_epoch - 1]
    }
}

/// Shuffled split into (training rows, validation rows); the validation set
/// has `floor(fraction · n)` rows. Both lists come back sorted.
pub fn split_validation(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!("validation fraction must lie in [0, 1), got {fraction}")));
    }
    let n_val = (fraction * n as f64).floor() as usize;
    if n_val >= n {
        return Err(Error::EmptyTraining);
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SPLIT_STREAM);
    perm.shuffle(&mut rng);
    let mut val = perm[..n_val].to_vec();
    let mut train = perm[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

/// Gradient of the penalized mean NLL over `rows`, aligned with `theta`.
pub fn grad_nll(model: &MixtureModel, rows: &[usize]) -> Result<Vec<f64>> {
    Ok(model.evaluate(rows, true)?.grad.expect("gradient requested"))
}

/// Patience-based stopping rule with `min_delta = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, best_epoch: 0, wait: 0 }
    }

    /// Records the monitored loss of `epoch`; returns `true` on strict
    /// improvement.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.wait = 0;
            true
        } else {
            self.wait += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.wait >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// Fits `model` in place.
///
/// With `early_stopping` the parameters of the best monitored epoch are
/// restored at the end; otherwise the final parameters are kept.
pub fn train(model: &mut MixtureModel, config: &TrainConfig) -> Result<History> {
    config.validate()?;
    let (train_rows, val_rows) = split_validation(model.n_obs(), config.validation_split, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut state = OptimizerState::new(config.optimizer, model.theta.len());
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best_theta = model.theta.clone();
    let mut order = train_rows.clone();
    let n_batches = order.len().div_ceil(config.batch_size);

    let mut history = History {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        stopped_epoch: 0,
        monitor: if val_rows.is_empty() { "train_loss" } else { "val_loss" }.to_string(),
        optimizer: config.optimizer,
        batch_size: config.batch_size,
        n_train: train_rows.len(),
        n_validation: val_rows.len(),
    };

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let eval = model.evaluate(batch, true).map_err(|e| match e {
                Error::NonFiniteObjective(_) => Error::NonFiniteLoss { epoch, batch: b + 1 },
                other => other,
            })?;
            let grad = eval.grad.expect("gradient requested");
            if !eval.loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            state.step(&mut model.theta, &grad)?;
        }

        let train_loss = model.evaluate(&train_rows, false)?.loss;
        let val_loss = if val_rows.is_empty() { None } else { Some(model.evaluate(&val_rows, false)?.loss) };
        let monitored = val_loss.unwrap_or(train_loss);
        if !monitored.is_finite() || !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: n_batches });
        }
        history.train_loss.push(train_loss);
        history.val_loss.extend(val_loss);
        history.stopped_epoch = epoch;
        if stopper.observe(epoch, monitored) && config.early_stopping {
            best_theta.clone_from(&model.theta);
        }
        if config.early_stopping && stopper.should_stop() {
            break;
        }
    }

    history.best_epoch = stopper.best_epoch();
    if config.early_stopping {
        model.theta = best_theta;
    }
    Ok(history)
}
