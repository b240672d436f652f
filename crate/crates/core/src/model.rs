//! Parameter layout of the joint translation and parsing model.
//!
//! One bidirectional source encoder, one attention-equipped decoder, and the
//! parser side: a stack LSTM over composed subtree vectors, an action
//! history LSTM, a composition layer, and the action classifier. Target word
//! embeddings are a single slot shared between the decoder input and the
//! vectors pushed on SHIFT.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::lstm::LstmParams;
use crate::params::{ParamId, ParameterStore};
use crate::tensor::{Real, Tensor};

/// Ablation switches: each one removes the corresponding component's state
/// from the action classifier's input block (and the matching weight
/// columns), leaving the rest of the model unchanged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AblationFlags {
    pub without_buffer: bool,
    pub without_action: bool,
    pub without_stack: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub num_labels: usize,
    pub word_dim: usize,
    pub action_dim: usize,
    pub hidden_dim: usize,
    pub ablation: AblationFlags,
}

impl ModelConfig {
    /// SHIFT plus a left and a right reduce per label.
    pub fn num_actions(&self) -> usize {
        2 * self.num_labels + 1
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("src_vocab", self.src_vocab),
            ("tgt_vocab", self.tgt_vocab),
            ("num_labels", self.num_labels),
            ("word_dim", self.word_dim),
            ("action_dim", self.action_dim),
            ("hidden_dim", self.hidden_dim),
        ] {
            if v == 0 {
                return Err(CoreError::Config(format!("{name} must be positive")));
            }
        }
        if self.src_vocab < 2 || self.tgt_vocab < 2 {
            return Err(CoreError::Config(
                "vocabularies need at least the UNK and EOS entries".into(),
            ));
        }
        Ok(())
    }

    /// Input width of the action classifier's combination layer.
    pub fn action_input_dim(&self) -> usize {
        let mut blocks = 0;
        if !self.ablation.without_buffer {
            blocks += 1;
        }
        if !self.ablation.without_stack {
            blocks += 1;
        }
        if !self.ablation.without_action {
            blocks += 1;
        }
        blocks * self.hidden_dim
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    /// Source word embeddings, `[src_vocab, word_dim]`.
    pub src_embed: ParamId,
    /// Target word embeddings, `[tgt_vocab, word_dim]`; shared between the
    /// decoder input and the stack contents pushed on SHIFT.
    pub tgt_embed: ParamId,
    /// Fine-grained action embeddings, `[num_actions, action_dim]`.
    pub act_embed: ParamId,
    pub enc_fwd: LstmParams,
    pub enc_bwd: LstmParams,
    /// Decoder cell; input is `[word embedding; previous attention output]`.
    pub dec: LstmParams,
    /// Attention score matrix, `[2*hidden, hidden]`.
    pub attn_w: ParamId,
    /// Combination of decoder state and context, `[hidden, 3*hidden]` + bias.
    pub comb_w: ParamId,
    pub comb_b: ParamId,
    /// Output word softmax, `[tgt_vocab, hidden]` + bias; zero-initialized.
    pub out_w: ParamId,
    pub out_b: ParamId,
    /// Stack LSTM over pushed word/composition vectors.
    pub stack: LstmParams,
    /// Action history LSTM over action embeddings.
    pub act_hist: LstmParams,
    /// Composition of (dependent, head, action embedding) into a subtree
    /// vector, `[word_dim, 2*word_dim + action_dim]` + bias.
    pub compose_w: ParamId,
    pub compose_b: ParamId,
    /// Combination layer feeding the action softmax + bias.
    pub act_comb_w: ParamId,
    pub act_comb_b: ParamId,
    /// Action softmax, `[num_actions, hidden]` + bias; zero-initialized.
    pub act_out_w: ParamId,
    pub act_out_b: ParamId,
}

const INIT_SCALE: Real = 0.1;

fn uniform<R: Rng>(
    store: &mut ParameterStore,
    name: &str,
    shape: &[usize],
    rng: &mut R,
) -> Result<ParamId> {
    let mut t = Tensor::zeros(shape);
    for x in t.data_mut() {
        *x = rng.gen_range(-INIT_SCALE..=INIT_SCALE);
    }
    store.add(name, t)
}

fn zeros(store: &mut ParameterStore, name: &str, shape: &[usize]) -> Result<ParamId> {
    store.add(name, Tensor::zeros(shape))
}

impl Model {
    /// Registers and initializes every slot: weights and embeddings uniform
    /// in `[-0.1, 0.1]`, biases zero except LSTM forget gates (one), and the
    /// word/action softmax weights zero.
    pub fn init<R: Rng>(
        store: &mut ParameterStore,
        config: ModelConfig,
        rng: &mut R,
    ) -> Result<Model> {
        config.validate()?;
        let d = config.hidden_dim;
        let w = config.word_dim;
        let a = config.action_dim;

        let src_embed = uniform(store, "src_embed", &[config.src_vocab, w], rng)?;
        let tgt_embed = uniform(store, "tgt_embed", &[config.tgt_vocab, w], rng)?;
        let act_embed = uniform(store, "act_embed", &[config.num_actions(), a], rng)?;

        let enc_fwd = LstmParams::register(store, "enc_fwd", w, d, INIT_SCALE, rng)?;
        let enc_bwd = LstmParams::register(store, "enc_bwd", w, d, INIT_SCALE, rng)?;
        let dec = LstmParams::register(store, "dec", w + d, d, INIT_SCALE, rng)?;

        let attn_w = uniform(store, "attn.w", &[2 * d, d], rng)?;
        let comb_w = uniform(store, "comb.w", &[d, 3 * d], rng)?;
        let comb_b = zeros(store, "comb.b", &[d])?;
        let out_w = zeros(store, "out.w", &[config.tgt_vocab, d])?;
        let out_b = zeros(store, "out.b", &[config.tgt_vocab])?;

        let stack = LstmParams::register(store, "stack", w, d, INIT_SCALE, rng)?;
        let act_hist = LstmParams::register(store, "act_hist", a, d, INIT_SCALE, rng)?;
        let compose_w = uniform(store, "compose.w", &[w, 2 * w + a], rng)?;
        let compose_b = zeros(store, "compose.b", &[w])?;
        let act_comb_w = uniform(store, "act_comb.w", &[d, config.action_input_dim()], rng)?;
        let act_comb_b = zeros(store, "act_comb.b", &[d])?;
        let act_out_w = zeros(store, "act_out.w", &[config.num_actions(), d])?;
        let act_out_b = zeros(store, "act_out.b", &[config.num_actions()])?;

        Ok(Model {
            config,
            src_embed,
            tgt_embed,
            act_embed,
            enc_fwd,
            enc_bwd,
            dec,
            attn_w,
            comb_w,
            comb_b,
            out_w,
            out_b,
            stack,
            act_hist,
            compose_w,
            compose_b,
            act_comb_w,
            act_comb_b,
            act_out_w,
            act_out_b,
        })
    }

    /// Binds to the slots of an existing store (checkpoint reload),
    /// verifying every shape against the configuration.
    pub fn from_store(store: &ParameterStore, config: ModelConfig) -> Result<Model> {
        config.validate()?;
        let d = config.hidden_dim;
        let w = config.word_dim;
        let a = config.action_dim;
        let model = Model {
            config,
            src_embed: store.id("src_embed")?,
            tgt_embed: store.id("tgt_embed")?,
            act_embed: store.id("act_embed")?,
            enc_fwd: LstmParams::from_store(store, "enc_fwd", w, d)?,
            enc_bwd: LstmParams::from_store(store, "enc_bwd", w, d)?,
            dec: LstmParams::from_store(store, "dec", w + d, d)?,
            attn_w: store.id("attn.w")?,
            comb_w: store.id("comb.w")?,
            comb_b: store.id("comb.b")?,
            out_w: store.id("out.w")?,
            out_b: store.id("out.b")?,
            stack: LstmParams::from_store(store, "stack", w, d)?,
            act_hist: LstmParams::from_store(store, "act_hist", a, d)?,
            compose_w: store.id("compose.w")?,
            compose_b: store.id("compose.b")?,
            act_comb_w: store.id("act_comb.w")?,
            act_comb_b: store.id("act_comb.b")?,
            act_out_w: store.id("act_out.w")?,
            act_out_b: store.id("act_out.b")?,
        };
        for (id, shape) in [
            (model.src_embed, vec![config.src_vocab, w]),
            (model.tgt_embed, vec![config.tgt_vocab, w]),
            (model.act_embed, vec![config.num_actions(), a]),
            (model.attn_w, vec![2 * d, d]),
            (model.comb_w, vec![d, 3 * d]),
            (model.out_w, vec![config.tgt_vocab, d]),
            (model.compose_w, vec![w, 2 * w + a]),
            (model.act_comb_w, vec![d, config.action_input_dim()]),
            (model.act_out_w, vec![config.num_actions(), d]),
        ] {
            if store.value(id).shape() != shape.as_slice() {
                return Err(CoreError::Checkpoint(format!(
                    "slot {} has shape {:?}, expected {:?}",
                    store.name(id),
                    store.value(id).shape(),
                    shape
                )));
            }
        }
        Ok(model)
    }

    /// Slots that only the parser side uses; translation-only decoding never
    /// reads them, so they can be dropped (or zeroed) after training.
    pub fn parser_param_ids(&self) -> Vec<ParamId> {
        vec![
            self.act_embed,
            self.stack.wx,
            self.stack.wh,
            self.stack.bias,
            self.act_hist.wx,
            self.act_hist.wh,
            self.act_hist.bias,
            self.compose_w,
            self.compose_b,
            self.act_comb_w,
            self.act_comb_b,
            self.act_out_w,
            self.act_out_b,
        ]
    }

    pub fn slot_names(store: &ParameterStore) -> Vec<String> {
        store.ids().map(|id| String::from(store.name(id))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn tiny_config() -> ModelConfig {
        ModelConfig {
            src_vocab: 7,
            tgt_vocab: 9,
            num_labels: 3,
            word_dim: 4,
            action_dim: 3,
            hidden_dim: 5,
            ablation: AblationFlags::default(),
        }
    }

    #[test]
    fn init_respects_ranges_and_zero_slots() {
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = Model::init(&mut store, tiny_config(), &mut rng).unwrap();

        for id in store.ids() {
            for &x in store.value(id).data() {
                assert!(x.abs() <= INIT_SCALE + 1e-12 || x == 1.0);
            }
        }
        assert!(store.value(model.out_w).data().iter().all(|&x| x == 0.0));
        assert!(store
            .value(model.act_out_w)
            .data()
            .iter()
            .all(|&x| x == 0.0));
        // Forget-gate bias rows are exactly one.
        let d = model.config.hidden_dim;
        let b = store.value(model.dec.bias).data();
        for k in 0..4 * d {
            let expected = if (d..2 * d).contains(&k) { 1.0 } else { 0.0 };
            assert_eq!(b[k], expected);
        }
    }

    #[test]
    fn ablation_shrinks_action_classifier_input() {
        let mut cfg = tiny_config();
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        Model::init(&mut store, cfg, &mut rng).unwrap();
        let full = store.num_scalars();

        cfg.ablation.without_stack = true;
        let mut store2 = ParameterStore::new();
        let mut rng2 = ChaCha8Rng::seed_from_u64(1);
        Model::init(&mut store2, cfg, &mut rng2).unwrap();
        let ablated = store2.num_scalars();
        assert_eq!(full - ablated, cfg.hidden_dim * cfg.hidden_dim);
    }

    #[test]
    fn from_store_checks_shapes() {
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = tiny_config();
        Model::init(&mut store, cfg, &mut rng).unwrap();
        assert!(Model::from_store(&store, cfg).is_ok());
        let mut wrong = cfg;
        wrong.hidden_dim += 1;
        assert!(Model::from_store(&store, wrong).is_err());
    }
}
