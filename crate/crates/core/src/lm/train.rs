use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Ablation, ModelConfig};
use super::model::{LanguageModel, Weights};
use crate::corpus::{EncodedDocument, Vocabulary};
use crate::error::{Error, Result};
use crate::numgrad::{adadelta_update, AdaDeltaState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-token cross-entropy over the epoch's minibatches, measured
    /// before each update.
    pub train_nll: f64,
    pub dev_perplexity: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

/// Minibatch AdaDelta over summed document cross-entropy.
pub struct Trainer {
    pub model: LanguageModel,
    optimizer: Vec<AdaDeltaState>,
    grads: Weights,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl Trainer {
    pub fn new(model: LanguageModel) -> Result<Self> {
        let optimizer = model
            .weights
            .arrays()
            .iter()
            .map(|a| AdaDeltaState::new(a.data.len(), model.config.rho, model.config.epsilon))
            .collect::<Result<Vec<_>>>()?;
        let grads = model.weights.zeros_like();
        let rng = ChaCha8Rng::seed_from_u64(model.config.seed ^ 0x7261_696e);
        Ok(Self { model, optimizer, grads, rng, epoch: 0 })
    }

    /// One pass over `docs`; returns the mean per-token training loss.
    pub fn epoch(&mut self, docs: &[EncodedDocument]) -> Result<f64> {
        self.epoch += 1;
        for doc in docs {
            self.model.check_inputs(doc)?;
        }
        let mut order: Vec<usize> = (0..docs.len()).collect();
        if self.model.config.shuffle {
            order.shuffle(&mut self.rng);
        }
        let (mut total, mut count) = (0.0, 0usize);
        for (batch_no, batch) in order.chunks(self.model.config.minibatch).enumerate() {
            self.grads.fill_zero();
            for &i in batch {
                let doc = &docs[i];
                let loss = self.model.loss_and_grad(doc, &mut self.grads);
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "loss {loss} on document {} (epoch {}, batch {batch_no})",
                        doc.id, self.epoch
                    )));
                }
                total += loss;
                count += doc.len() + 1;
            }
            self.update()?;
        }
        Ok(if count == 0 { 0.0 } else { total / count as f64 })
    }

    fn update(&mut self) -> Result<()> {
        let grads = self.grads.arrays();
        if grads.iter().any(|g| g.data.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite(format!("gradient in epoch {}", self.epoch)));
        }
        for ((param, grad), state) in self.model.weights.arrays_mut().into_iter().zip(&grads).zip(&mut self.optimizer) {
            adadelta_update(param, grad.data, state)?;
        }
        Ok(())
    }

    pub fn into_model(self) -> LanguageModel {
        self.model
    }
}

/// Trains a fresh model for `config.epochs` epochs, logging dev perplexity
/// after each one when `dev` is non-empty.
pub fn train(
    config: &ModelConfig,
    vocab: &Vocabulary,
    train_docs: &[EncodedDocument],
    dev_docs: &[EncodedDocument],
) -> Result<(LanguageModel, TrainingLog)> {
    if train_docs.iter().all(EncodedDocument::is_empty) {
        return Err(Error::EmptyCorpus);
    }
    let model = LanguageModel::new(config.clone(), vocab.clone())?;
    let mut trainer = Trainer::new(model)?;
    let mut log = TrainingLog::default();
    for epoch in 1..=config.epochs {
        let train_nll = trainer.epoch(train_docs)?;
        let dev_perplexity =
            if dev_docs.is_empty() { None } else { Some(trainer.model.perplexity(dev_docs, Ablation::NONE)?) };
        info!(
            "{} epoch {epoch}/{}: train nll {train_nll:.4}, dev ppl {}",
            config.variant().label(),
            config.epochs,
            dev_perplexity.map_or("-".into(), |p| format!("{p:.3}"))
        );
        log.epochs.push(EpochLog { epoch, train_nll, dev_perplexity });
    }
    Ok((trainer.into_model(), log))
}
