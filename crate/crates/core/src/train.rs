//! Per-instance SGD training with early stopping on dev exact-match accuracy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingTable, Instance};
use crate::error::Result;
use crate::eval::exact_match_accuracy;
use crate::model::Model;
use crate::optim::SgdMomentum;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: SgdMomentum,
    pub max_epochs: usize,
    /// Stop after this many epochs without dev improvement.
    pub patience: usize,
    /// Seeds the per-epoch shuffling.
    pub seed: u64,
    /// Stop as soon as dev accuracy reaches this value.
    pub target_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: SgdMomentum::default(),
            max_epochs: 50,
            patience: 5,
            seed: 1,
            target_accuracy: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub dev_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub epochs_run: usize,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
    pub best_dev_accuracy: Option<f64>,
    pub history: Vec<EpochStats>,
}

fn snapshot(model: &Model) -> Vec<Tensor> {
    model.params().iter().map(|p| p.value.clone()).collect()
}

fn restore(model: &mut Model, values: Vec<Tensor>) {
    for (p, v) in model.params_mut().iter_mut().zip(values) {
        p.value = v;
    }
}

/// Trains in place. With a non-empty `dev` set the parameters of the best dev
/// epoch are restored at the end; otherwise the last epoch is kept.
pub fn train(
    model: &mut Model,
    emb: &EmbeddingTable,
    train_set: &[Instance],
    dev: &[Instance],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Vec<Tensor>)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            total += model.train_step(&train_set[i], emb, &cfg.optimizer)?;
        }
        let dev_accuracy = if dev.is_empty() {
            None
        } else {
            Some(exact_match_accuracy(model, emb, dev)?)
        };
        let stats = EpochStats {
            epoch,
            mean_loss: total / train_set.len().max(1) as f64,
            dev_accuracy,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} dev {:?}",
            stats.mean_loss,
            stats.dev_accuracy
        );
        on_epoch(&stats);
        history.push(stats);

        let Some(acc) = dev_accuracy else { continue };
        if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
            best = Some((acc, epoch, snapshot(model)));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if cfg.target_accuracy.is_some_and(|t| acc >= t) || since_best >= cfg.patience {
            break;
        }
    }

    let epochs_run = history.len();
    Ok(match best {
        Some((acc, epoch, values)) => {
            restore(model, values);
            TrainOutcome {
                epochs_run,
                best_epoch: epoch,
                best_dev_accuracy: Some(acc),
                history,
            }
        }
        None => TrainOutcome {
            epochs_run,
            best_epoch: epochs_run,
            best_dev_accuracy: None,
            history,
        },
    })
}
