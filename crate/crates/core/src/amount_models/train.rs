use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, backward, sample_loss, AdamConfig, AdamState, HeadGrad, HeadKind, HeadParams, ModelError};

/// A feature vector paired with its target amounts (normalized to sum 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub features: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: HeadParams,
    /// Mean training loss of each epoch.
    pub train_loss: Vec<f64>,
    /// Mean validation loss after each epoch; empty without a validation set.
    pub val_loss: Vec<f64>,
    /// Epoch (0-based) whose parameters were returned.
    pub best_epoch: usize,
}

fn check_dims(samples: &[Sample], inputs: usize, outputs: usize) -> Result<(), ModelError> {
    for s in samples {
        if s.features.len() != inputs {
            return Err(ModelError::MixedDimensions {
                id: s.id.clone(),
                expected: inputs,
                found: s.features.len(),
            });
        }
        if s.target.len() != outputs {
            return Err(ModelError::DimensionMismatch {
                expected: outputs,
                found: s.target.len(),
            });
        }
    }
    Ok(())
}

fn mean_loss(params: &HeadParams, samples: &[Sample]) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for s in samples {
        total += sample_loss(params, &s.features, &s.target)?;
    }
    Ok(total / samples.len() as f64)
}

/// Mini-batch Adam training with a seeded shuffle per epoch.
///
/// With a nonempty validation set the returned parameters are those of the
/// epoch with the lowest validation loss; otherwise the final ones.
pub fn train(
    train_set: &[Sample],
    validation: &[Sample],
    kind: HeadKind,
    config: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    let first = train_set.first().ok_or(ModelError::EmptyDataset)?;
    if config.batch_size == 0 {
        return Err(ModelError::BadConfig("batch size must be at least 1".into()));
    }
    if !(config.adam.lr > 0.0) {
        return Err(ModelError::BadConfig(format!(
            "learning rate {} is not positive",
            config.adam.lr
        )));
    }
    let (inputs, outputs) = (first.features.len(), first.target.len());
    check_dims(train_set, inputs, outputs)?;
    check_dims(validation, inputs, outputs)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = HeadParams::init(kind, outputs, inputs, &mut rng);
    let mut state = AdamState::new(&params, config.adam);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut train_loss = Vec::with_capacity(config.epochs);
    let mut val_loss = Vec::new();
    let mut best = (f64::INFINITY, 0usize, params.clone());

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grad = HeadGrad::zeros_like(&params);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &train_set[i];
                epoch_total += sample_loss(&params, &s.features, &s.target)?;
                grad.add_scaled(&backward(&params, &s.features, &s.target)?, scale);
            }
            adam_step(&mut params, &grad, &mut state)?;
        }
        train_loss.push(epoch_total / train_set.len() as f64);
        if !validation.is_empty() {
            let loss = mean_loss(&params, validation)?;
            val_loss.push(loss);
            if loss < best.0 {
                best = (loss, epoch, params.clone());
            }
        }
    }

    if validation.is_empty() {
        let last = config.epochs.saturating_sub(1);
        return Ok(TrainOutcome {
            params,
            train_loss,
            val_loss,
            best_epoch: last,
        });
    }
    Ok(TrainOutcome {
        params: best.2,
        train_loss,
        val_loss,
        best_epoch: best.1,
    })
}
