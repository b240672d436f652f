//! Training recipe: initialization, summed-batch SGD with gradient-norm
//! clipping, and the development-perplexity learning-rate schedule
//! (halve and reload the best model whenever dev perplexity increases).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

// Needed for exp in no_std builds; shadowed by the inherent method otherwise.
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::model::{AblationFlags, Model, ModelConfig};
use crate::oracle::SentencePair;
use crate::params::ParameterStore;
use crate::tape::Tape;
use crate::tensor::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub word_dim: usize,
    pub action_dim: usize,
    pub hidden_dim: usize,
    pub learning_rate: Real,
    pub clip_threshold: Real,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub ablation: AblationFlags,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            word_dim: 256,
            action_dim: 128,
            hidden_dim: 256,
            learning_rate: 1.0,
            clip_threshold: 3.0,
            batch_size: 128,
            max_epochs: 20,
            ablation: AblationFlags::default(),
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // A zero learning rate is a legal no-op step.
        if self.learning_rate < 0.0 || self.clip_threshold <= 0.0 {
            return Err(CoreError::Config(
                "learning rate must be non-negative and clip threshold positive".into(),
            ));
        }
        for (name, v) in [
            ("word_dim", self.word_dim),
            ("action_dim", self.action_dim),
            ("hidden_dim", self.hidden_dim),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
        ] {
            if v == 0 {
                return Err(CoreError::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn model_config(
        &self,
        src_vocab: usize,
        tgt_vocab: usize,
        num_labels: usize,
    ) -> ModelConfig {
        ModelConfig {
            src_vocab,
            tgt_vocab,
            num_labels,
            word_dim: self.word_dim,
            action_dim: self.action_dim,
            hidden_dim: self.hidden_dim,
            ablation: self.ablation,
        }
    }
}

/// Builds and initializes a fresh model under a seeded generator.
pub fn init_parameters(config: ModelConfig, seed: u64) -> Result<(ParameterStore, Model)> {
    let mut store = ParameterStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Model::init(&mut store, config, &mut rng)?;
    Ok((store, model))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipOutcome {
    /// Global L2 norm before clipping.
    pub norm: Real,
    pub scaled: bool,
}

/// Scales all gradients by `threshold / norm` when the global L2 norm
/// exceeds the threshold; direction is preserved exactly.
pub fn clip_gradients(store: &mut ParameterStore, threshold: Real) -> Result<ClipOutcome> {
    if let Some(slot) = store.first_non_finite_grad() {
        return Err(CoreError::NonFinite {
            context: String::from(slot),
        });
    }
    let norm = store.grad_norm();
    if norm <= threshold {
        return Ok(ClipOutcome {
            norm,
            scaled: false,
        });
    }
    let factor = threshold / norm;
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for g in store.grad_mut(id).data_mut() {
            *g *= factor;
        }
    }
    Ok(ClipOutcome { norm, scaled: true })
}

/// Plain SGD step over accumulated gradients.
pub fn sgd_step(store: &mut ParameterStore, learning_rate: Real) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let grad = store.grad(id).data().to_vec();
        for (v, g) in store.value_mut(id).data_mut().iter_mut().zip(grad) {
            *v -= learning_rate * g;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub total_loss: Real,
    pub mean_loss: Real,
    pub pairs: usize,
    pub words: usize,
    pub actions: usize,
}

/// One pass over `pairs` in the given order: per batch, sum the joint loss,
/// accumulate gradients, clip, and take one SGD step. Deterministic for a
/// fixed pair order.
pub fn train_epoch(
    store: &mut ParameterStore,
    model: &Model,
    pairs: &[SentencePair],
    config: &TrainConfig,
) -> Result<EpochStats> {
    config.validate()?;
    let mut stats = EpochStats {
        total_loss: 0.0,
        mean_loss: 0.0,
        pairs: pairs.len(),
        words: 0,
        actions: 0,
    };
    for batch in pairs.chunks(config.batch_size) {
        store.zero_grads();
        for pair in batch {
            let mut tape = Tape::new();
            let loss =
                model.joint_nll(&mut tape, store, &pair.source, &pair.target, &pair.actions)?;
            let value = tape.scalar_value(loss.total)?;
            if !value.is_finite() {
                return Err(CoreError::NonFinite {
                    context: "training loss".into(),
                });
            }
            stats.total_loss += value;
            stats.words += loss.word_count;
            stats.actions += loss.action_count;
            tape.backward(loss.total, store)?;
        }
        clip_gradients(store, config.clip_threshold)?;
        sgd_step(store, config.learning_rate);
    }
    if !pairs.is_empty() {
        stats.mean_loss = stats.total_loss / pairs.len() as Real;
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleDecision {
    /// Perplexity did not increase: keep the model and record it as best.
    Record,
    /// Perplexity increased: halve the learning rate and reload the best
    /// checkpoint.
    HalveAndReload,
}

/// Development-perplexity schedule state.
#[derive(Debug, Clone, Copy)]
pub struct LrSchedule {
    learning_rate: Real,
    best: Option<Real>,
}

impl LrSchedule {
    pub fn new(learning_rate: Real) -> Self {
        LrSchedule {
            learning_rate,
            best: None,
        }
    }

    pub fn learning_rate(&self) -> Real {
        self.learning_rate
    }

    pub fn best(&self) -> Option<Real> {
        self.best
    }

    /// Feed the epoch's dev perplexity and get the decision.
    pub fn observe(&mut self, perplexity: Real) -> ScheduleDecision {
        match self.best {
            Some(best) if perplexity > best => {
                self.learning_rate /= 2.0;
                ScheduleDecision::HalveAndReload
            }
            _ => {
                self.best = Some(perplexity);
                ScheduleDecision::Record
            }
        }
    }

    /// Restores schedule state from a checkpoint.
    pub fn resume(learning_rate: Real, best: Option<Real>) -> Self {
        LrSchedule {
            learning_rate,
            best,
        }
    }
}
