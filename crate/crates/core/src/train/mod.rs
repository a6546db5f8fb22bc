//! Parameters, optimizers, gradient checking, checkpoints and the epoch loop.

pub mod checkpoint;
pub mod gradcheck;
pub mod optim;
pub mod params;

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, GradCheckReport};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{Gradients, HasParams, Init, InitScheme, ParamId, ParamStore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Global-norm gradient clipping; `None` disables it.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    pub init: InitScheme,
    /// Stop after this many epochs without validation improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 10,
            clip_norm: Some(5.0),
            seed: 0,
            init: InitScheme::GlorotUniform,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        Optimizer::new(self.optimizer, self.learning_rate, self.clip_norm).map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub step: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "epoch,step,train_loss,val_loss,seconds")?;
        for r in &self.rows {
            let val = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{:.3}", r.epoch, r.step, r.train_loss, val, r.seconds)?;
        }
        Ok(())
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }
}

/// Mini-batch training loop.
///
/// `loss_grad` returns the loss of one example and accumulates its gradient;
/// batch gradients are averaged before each optimizer step. Example order is
/// shuffled per epoch from `config.seed`, so runs are reproducible.
pub fn fit<M, E, G, L>(
    model: &mut M,
    train: &[E],
    val: &[E],
    config: &TrainConfig,
    loss_grad: G,
    loss: L,
    mut on_epoch: impl FnMut(usize, &M, &LogRow),
) -> Result<TrainLog>
where
    M: HasParams,
    G: Fn(&M, &E, &mut Gradients) -> Result<f64>,
    L: Fn(&M, &E) -> Result<f64>,
{
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Ingest("no training examples".into()));
    }
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, config.clip_norm)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x005e_ed0f_da7a);
    let mut grads = Gradients::zeros_for(model.params());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainLog::default();
    let start = Instant::now();
    let mut step = 0;
    let mut best_val = f64::INFINITY;
    let mut stale = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            for &i in batch {
                total += loss_grad(model, &train[i], &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            opt.step(model.params_mut(), &mut grads)?;
            step += 1;
        }
        let val_loss = if val.is_empty() {
            None
        } else {
            let mut s = 0.0;
            for e in val {
                s += loss(model, e)?;
            }
            Some(s / val.len() as f64)
        };
        let row = LogRow {
            epoch,
            step,
            train_loss: total / train.len() as f64,
            val_loss,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch} step {step} train {:.5} val {:?}",
            row.train_loss,
            row.val_loss
        );
        on_epoch(epoch, model, &row);
        log.rows.push(row);

        if let (Some(patience), Some(v)) = (config.patience, val_loss) {
            if v < best_val {
                best_val = v;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }
    Ok(log)
}
