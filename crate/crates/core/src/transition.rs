//! The parser half of the joint model: labeled arc-standard actions, the
//! parser state (stack LSTM plus action history), action legality and
//! distribution, and the joint rollout that gates the decoder on SHIFT.

use alloc::vec;
use alloc::vec::Vec;

// Needed for exp in no_std builds; shadowed by the inherent method otherwise.
#[allow(unused_imports)]
use num_traits::Float;

use crate::encdec::{DecoderState, SourceEncoding};
use crate::error::{CoreError, Result};
use crate::lstm::{LstmNodes, StackLstm};
use crate::model::Model;
use crate::oracle::EOS_ID;
use crate::params::ParameterStore;
use crate::tape::{NodeId, Tape};
use crate::tensor::Real;

pub type LabelId = usize;

/// A fine-grained transition action. SHIFT is unlabeled; both reduces carry
/// a dependency label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Action {
    Shift,
    ReduceLeft(LabelId),
    ReduceRight(LabelId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Shift,
    ReduceLeft,
    ReduceRight,
}

impl Action {
    pub fn kind(self) -> ActionKind {
        match self {
            Action::Shift => ActionKind::Shift,
            Action::ReduceLeft(_) => ActionKind::ReduceLeft,
            Action::ReduceRight(_) => ActionKind::ReduceRight,
        }
    }

    pub fn label(self) -> Option<LabelId> {
        match self {
            Action::Shift => None,
            Action::ReduceLeft(l) | Action::ReduceRight(l) => Some(l),
        }
    }

    /// Id in the fine-grained action vocabulary: SHIFT, then the left and
    /// right reduce for each label.
    pub fn index(self, num_labels: usize) -> usize {
        match self {
            Action::Shift => 0,
            Action::ReduceLeft(l) => {
                debug_assert!(l < num_labels);
                1 + 2 * l
            }
            Action::ReduceRight(l) => {
                debug_assert!(l < num_labels);
                2 + 2 * l
            }
        }
    }

    pub fn from_index(index: usize, num_labels: usize) -> Result<Action> {
        if index == 0 {
            return Ok(Action::Shift);
        }
        let l = (index - 1) / 2;
        if l >= num_labels {
            return Err(CoreError::IdOutOfRange {
                what: "action",
                id: index,
                size: 2 * num_labels + 1,
            });
        }
        Ok(if index % 2 == 1 {
            Action::ReduceLeft(l)
        } else {
            Action::ReduceRight(l)
        })
    }
}

/// Action kinds legal in a given configuration: reduces need two stack
/// items, SHIFT needs generation not to have terminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LegalKinds {
    pub shift: bool,
    pub reduce: bool,
}

pub fn legal_kinds(stack_depth: usize, can_shift: bool) -> LegalKinds {
    LegalKinds {
        shift: can_shift,
        reduce: stack_depth >= 2,
    }
}

/// Terminal iff generation is done and exactly the root remains.
pub fn is_terminal(stack_depth: usize, can_shift: bool) -> bool {
    !can_shift && stack_depth == 1
}

/// Ascending fine-grained ids of the legal actions.
pub fn legal_action_indices(stack_depth: usize, can_shift: bool, num_labels: usize) -> Vec<usize> {
    let kinds = legal_kinds(stack_depth, can_shift);
    let mut out = Vec::new();
    if kinds.shift {
        out.push(0);
    }
    if kinds.reduce {
        out.extend(1..=2 * num_labels);
    }
    out
}

/// One symbolic stack entry: the subtree vector on the neural stack and the
/// token index of the subtree's head word.
#[derive(Debug, Clone, Copy)]
pub struct StackEntry {
    pub vec: NodeId,
    pub head: usize,
}

/// An emitted dependency arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArcEntry {
    pub dependent: usize,
    pub head: usize,
    pub label: LabelId,
}

/// Parser state: the stack LSTM with its symbolic mirror, the action history
/// LSTM, and the arcs emitted so far.
#[derive(Debug, Clone)]
pub struct ParserState {
    pub stack: StackLstm,
    pub entries: Vec<StackEntry>,
    pub history: LstmNodes,
    pub shifted: usize,
    pub actions_taken: usize,
    pub arcs: Vec<ArcEntry>,
}

impl ParserState {
    pub fn depth(&self) -> usize {
        self.entries.len()
    }
}

/// Paired translation and parser state during a joint rollout.
#[derive(Debug, Clone)]
pub struct JointState {
    pub decoder: DecoderState,
    pub parser: ParserState,
    pub words: Vec<usize>,
    pub eos_generated: bool,
}

impl JointState {
    pub fn can_shift(&self) -> bool {
        !self.eos_generated
    }

    pub fn is_terminal(&self) -> bool {
        is_terminal(self.parser.depth(), self.can_shift())
    }
}

/// Word and action loss terms of one teacher-forced joint rollout.
#[derive(Debug, Clone, Copy)]
pub struct JointLoss {
    pub total: NodeId,
    pub word_nll: NodeId,
    pub action_nll: NodeId,
    pub word_count: usize,
    pub action_count: usize,
}

impl Model {
    pub fn joint_init(&self, tape: &mut Tape) -> JointState {
        JointState {
            decoder: self.decoder_init(tape),
            parser: ParserState {
                stack: StackLstm::new(tape, self.stack),
                entries: Vec::new(),
                history: self.act_hist.initial(tape),
                shifted: 0,
                actions_taken: 0,
                arcs: Vec::new(),
            },
            words: Vec::new(),
            eos_generated: false,
        }
    }

    /// Raw action logits from explicit component states. Ablated components
    /// are excluded from the input concatenation entirely, so perturbing
    /// them cannot change the logits.
    pub fn action_logits_from(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        decoder_hidden: NodeId,
        stack_hidden: NodeId,
        history_hidden: NodeId,
    ) -> Result<NodeId> {
        let mut blocks = Vec::with_capacity(3);
        if !self.config.ablation.without_buffer {
            blocks.push(decoder_hidden);
        }
        if !self.config.ablation.without_stack {
            blocks.push(stack_hidden);
        }
        if !self.config.ablation.without_action {
            blocks.push(history_hidden);
        }
        let input = if blocks.is_empty() {
            tape.zeros(self.config.action_input_dim().max(1))
        } else {
            tape.concat(&blocks)?
        };
        let w = tape.param(store, self.act_comb_w);
        let b = tape.param(store, self.act_comb_b);
        let pre = tape.affine(w, input, Some(b))?;
        let hidden = tape.tanh(pre);
        let out_w = tape.param(store, self.act_out_w);
        let out_b = tape.param(store, self.act_out_b);
        tape.affine(out_w, hidden, Some(out_b))
    }

    /// Action logits for the current joint state.
    pub fn action_logits(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        state: &JointState,
    ) -> Result<NodeId> {
        let stack_top = state.parser.stack.top();
        self.action_logits_from(
            tape,
            store,
            state.decoder.state.hidden,
            stack_top.hidden,
            state.parser.history.hidden,
        )
    }

    /// Log-probabilities over the given legal action ids (masked
    /// renormalization: gather then log-softmax).
    pub fn action_log_probs(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        state: &JointState,
        legal: &[usize],
    ) -> Result<NodeId> {
        if legal.is_empty() {
            return Err(CoreError::NoLegalAction {
                step: state.parser.actions_taken,
            });
        }
        let logits = self.action_logits(tape, store, state)?;
        let gathered = tape.gather(logits, legal)?;
        tape.log_softmax(gathered)
    }

    /// Full-size probability vector over the fine-grained action vocabulary,
    /// masked to the legal set and renormalized; illegal entries are zero.
    pub fn action_distribution(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        state: &JointState,
    ) -> Result<Vec<Real>> {
        let legal = legal_action_indices(
            state.parser.depth(),
            state.can_shift(),
            self.config.num_labels,
        );
        let log_probs = self.action_log_probs(tape, store, state, &legal)?;
        let mut out = vec![0.0; self.config.num_actions()];
        for (k, &idx) in legal.iter().enumerate() {
            out[idx] = tape.value(log_probs).data()[k].exp();
        }
        Ok(out)
    }

    /// Applies SHIFT: advances the decoder one step (this is the only place
    /// the decoder moves), lets `choose` pick the emitted word from the log
    /// distribution, pushes the word's shared embedding onto the stack, and
    /// appends SHIFT to the action history. Returns the chosen word and the
    /// log word distribution.
    pub fn apply_shift<F>(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        state: &mut JointState,
        enc: &SourceEncoding,
        choose: F,
    ) -> Result<(usize, NodeId)>
    where
        F: FnOnce(&Tape, NodeId) -> Result<usize>,
    {
        if state.eos_generated {
            return Err(CoreError::IllegalTransition {
                step: state.parser.actions_taken,
                detail: "shift after EOS",
            });
        }
        let prev_word = state.words.last().copied().unwrap_or(EOS_ID);
        let (next_dec, log_probs) =
            self.decoder_step(tape, store, &state.decoder, prev_word, enc)?;
        let word = choose(tape, log_probs)?;
        if word >= self.config.tgt_vocab {
            return Err(CoreError::IdOutOfRange {
                what: "target token",
                id: word,
                size: self.config.tgt_vocab,
            });
        }
        state.decoder = next_dec;

        let embed = tape.param_row(store, self.tgt_embed, word)?;
        state.parser.stack.push(tape, store, embed)?;
        state.parser.entries.push(StackEntry {
            vec: embed,
            head: state.parser.shifted,
        });

        let act_vec = tape.param_row(
            store,
            self.act_embed,
            Action::Shift.index(self.config.num_labels),
        )?;
        state.parser.history = self
            .act_hist
            .step(tape, store, state.parser.history, act_vec)?;

        state.parser.shifted += 1;
        state.parser.actions_taken += 1;
        state.words.push(word);
        if word == EOS_ID {
            state.eos_generated = true;
        }
        debug_assert_eq!(state.parser.shifted, state.decoder.steps);
        Ok((word, log_probs))
    }

    /// Applies a labeled reduce: pops the top two subtrees, composes
    /// `tanh(W [dependent; head; action])`, pushes the result, records the
    /// arc, and appends the action to the history.
    pub fn apply_reduce(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        state: &mut JointState,
        action: Action,
    ) -> Result<()> {
        let label = match action {
            Action::Shift => {
                return Err(CoreError::IllegalTransition {
                    step: state.parser.actions_taken,
                    detail: "apply_reduce called with SHIFT",
                })
            }
            Action::ReduceLeft(l) | Action::ReduceRight(l) => l,
        };
        if label >= self.config.num_labels {
            return Err(CoreError::IdOutOfRange {
                what: "label",
                id: label,
                size: self.config.num_labels,
            });
        }
        if state.parser.depth() < 2 {
            return Err(CoreError::IllegalTransition {
                step: state.parser.actions_taken,
                detail: "reduce with stack depth < 2",
            });
        }
        let top = state.parser.entries.pop().unwrap();
        let second = state.parser.entries.pop().unwrap();
        state.parser.stack.pop()?;
        state.parser.stack.pop()?;

        // REDUCE-L: the top item heads its left neighbor; REDUCE-R mirrors.
        let (head_e, dep_e) = match action {
            Action::ReduceLeft(_) => (top, second),
            _ => (second, top),
        };
        let act_vec =
            tape.param_row(store, self.act_embed, action.index(self.config.num_labels))?;
        let cat = tape.concat(&[dep_e.vec, head_e.vec, act_vec])?;
        let w = tape.param(store, self.compose_w);
        let b = tape.param(store, self.compose_b);
        let pre = tape.affine(w, cat, Some(b))?;
        let composed = tape.tanh(pre);

        state.parser.stack.push(tape, store, composed)?;
        state.parser.entries.push(StackEntry {
            vec: composed,
            head: head_e.head,
        });
        state.parser.arcs.push(ArcEntry {
            dependent: dep_e.head,
            head: head_e.head,
            label,
        });
        state.parser.history = self
            .act_hist
            .step(tape, store, state.parser.history, act_vec)?;
        state.parser.actions_taken += 1;
        Ok(())
    }

    /// Teacher-forced joint negative log-likelihood of a sentence pair: the
    /// word terms from the SHIFT-gated decoder plus the action terms from
    /// the masked action distribution at every step.
    pub fn joint_nll(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        src: &[usize],
        tgt: &[usize],
        actions: &[Action],
    ) -> Result<JointLoss> {
        let m = tgt.len();
        if m == 0 {
            return Err(CoreError::EmptyInput("target sentence"));
        }
        let shifts = actions
            .iter()
            .filter(|a| matches!(a, Action::Shift))
            .count();
        if shifts != m {
            return Err(CoreError::Supervision {
                detail: "SHIFT count must equal target length",
                expected: m,
                found: shifts,
            });
        }

        let enc = self.encode(tape, store, src)?;
        let mut state = self.joint_init(tape);
        let mut word_terms = Vec::with_capacity(m);
        let mut action_terms = Vec::with_capacity(actions.len());

        for (t, &action) in actions.iter().enumerate() {
            let can_shift = state.parser.shifted < m;
            let legal =
                legal_action_indices(state.parser.depth(), can_shift, self.config.num_labels);
            let idx = action.index(self.config.num_labels);
            let pos = match legal.binary_search(&idx) {
                Ok(pos) => pos,
                Err(_) => {
                    return Err(CoreError::IllegalTransition {
                        step: t,
                        detail: "gold action not legal in this state",
                    })
                }
            };
            let log_probs = self.action_log_probs(tape, store, &state, &legal)?;
            action_terms.push(tape.pick(log_probs, pos)?);

            match action {
                Action::Shift => {
                    let gold = tgt[state.parser.shifted];
                    let (_, word_log_probs) =
                        self.apply_shift(tape, store, &mut state, &enc, |_, _| Ok(gold))?;
                    word_terms.push(tape.pick(word_log_probs, gold)?);
                }
                reduce => self.apply_reduce(tape, store, &mut state, reduce)?,
            }
        }

        if !state.is_terminal() {
            return Err(CoreError::Supervision {
                detail: "action sequence is not terminal",
                expected: 1,
                found: state.parser.depth(),
            });
        }
        debug_assert_eq!(state.parser.shifted, state.decoder.steps);

        let word_sum = tape.sum_scalars(&word_terms)?;
        let action_sum = tape.sum_scalars(&action_terms)?;
        let word_nll = tape.neg(word_sum);
        let action_nll = tape.neg(action_sum);
        let total = tape.add(word_nll, action_nll)?;
        Ok(JointLoss {
            total,
            word_nll,
            action_nll,
            word_count: m,
            action_count: actions.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AblationFlags, ModelConfig};
    use crate::oracle::{random_projective_tree, tree_to_actions};
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> ModelConfig {
        ModelConfig {
            src_vocab: 6,
            tgt_vocab: 7,
            num_labels: 3,
            word_dim: 3,
            action_dim: 2,
            hidden_dim: 4,
            ablation: AblationFlags::default(),
        }
    }

    fn build(seed: u64, config: ModelConfig) -> (ParameterStore, Model) {
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = Model::init(&mut store, config, &mut rng).unwrap();
        (store, model)
    }

    #[test]
    fn action_index_roundtrip() {
        let n = 4;
        for idx in 0..2 * n + 1 {
            let a = Action::from_index(idx, n).unwrap();
            assert_eq!(a.index(n), idx);
        }
        assert!(Action::from_index(2 * n + 1, n).is_err());
    }

    #[test]
    fn legality_matches_configuration() {
        assert_eq!(legal_action_indices(0, true, 2), vec![0]);
        assert_eq!(legal_action_indices(1, true, 2), vec![0]);
        assert_eq!(legal_action_indices(2, false, 2), vec![1, 2, 3, 4]);
        assert_eq!(legal_action_indices(2, true, 2), vec![0, 1, 2, 3, 4]);
        assert!(legal_action_indices(1, false, 2).is_empty());
        assert!(is_terminal(1, false));
        assert!(!is_terminal(2, false));
        assert!(!is_terminal(1, true));
    }

    #[test]
    fn initial_state_forces_shift() {
        let (store, model) = build(3, cfg());
        let mut tape = Tape::new();
        let state = model.joint_init(&mut tape);
        let dist = model
            .action_distribution(&mut tape, &store, &state)
            .unwrap();
        assert_eq!(dist[0], 1.0);
        assert!(dist[1..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn zero_classifier_gives_uniform_over_legal() {
        // act_out.w and act_out.b are zero at init.
        let (store, model) = build(5, cfg());
        let mut tape = Tape::new();
        let enc = model
            .encode(&mut tape, &store, &[2, crate::oracle::EOS_ID])
            .unwrap();
        let mut state = model.joint_init(&mut tape);
        model
            .apply_shift(&mut tape, &store, &mut state, &enc, |_, _| Ok(2))
            .unwrap();
        model
            .apply_shift(&mut tape, &store, &mut state, &enc, |_, _| Ok(3))
            .unwrap();
        let dist = model
            .action_distribution(&mut tape, &store, &state)
            .unwrap();
        let legal = legal_action_indices(2, true, 3);
        for &idx in &legal {
            assert!((dist[idx] - 1.0 / legal.len() as Real).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_increments_decoder_and_stack_and_pushes_shared_embedding() {
        let (store, model) = build(7, cfg());
        let mut tape = Tape::new();
        let enc = model
            .encode(&mut tape, &store, &[3, crate::oracle::EOS_ID])
            .unwrap();
        let mut state = model.joint_init(&mut tape);
        assert_eq!(state.decoder.steps, 0);
        let (word, _) = model
            .apply_shift(&mut tape, &store, &mut state, &enc, |_, _| Ok(4))
            .unwrap();
        assert_eq!(word, 4);
        assert_eq!(state.decoder.steps, 1);
        assert_eq!(state.parser.depth(), 1);
        assert_eq!(state.parser.shifted, 1);
        // The pushed vector is the shared target embedding row.
        let pushed = state.parser.entries[0].vec;
        assert_eq!(
            tape.value(pushed).data(),
            store.value(model.tgt_embed).row(4).unwrap()
        );
    }

    #[test]
    fn reduce_decrements_depth_and_bounds_composition() {
        let (store, model) = build(11, cfg());
        let mut tape = Tape::new();
        let enc = model
            .encode(&mut tape, &store, &[2, crate::oracle::EOS_ID])
            .unwrap();
        let mut state = model.joint_init(&mut tape);
        for w in [2, 3] {
            model
                .apply_shift(&mut tape, &store, &mut state, &enc, move |_, _| Ok(w))
                .unwrap();
        }
        model
            .apply_reduce(&mut tape, &store, &mut state, Action::ReduceLeft(1))
            .unwrap();
        assert_eq!(state.parser.depth(), 1);
        assert_eq!(
            state.parser.arcs,
            vec![ArcEntry {
                dependent: 0,
                head: 1,
                label: 1
            }]
        );
        for &x in tape.value(state.parser.entries[0].vec).data() {
            assert!(x > -1.0 && x < 1.0);
        }
        // Underflow guard.
        let err = model.apply_reduce(&mut tape, &store, &mut state, Action::ReduceRight(0));
        assert!(matches!(err, Err(CoreError::IllegalTransition { .. })));
    }

    #[test]
    fn reduce_conventions_match_symbolic_replay() {
        let (store, model) = build(13, cfg());
        let mut tape = Tape::new();
        let enc = model
            .encode(&mut tape, &store, &[2, crate::oracle::EOS_ID])
            .unwrap();

        // REDUCE-L: second item depends on top.
        let mut state = model.joint_init(&mut tape);
        for w in [2, 3] {
            model
                .apply_shift(&mut tape, &store, &mut state, &enc, move |_, _| Ok(w))
                .unwrap();
        }
        model
            .apply_reduce(&mut tape, &store, &mut state, Action::ReduceLeft(0))
            .unwrap();
        assert_eq!(state.parser.arcs[0].dependent, 0);
        assert_eq!(state.parser.arcs[0].head, 1);

        // REDUCE-R: top depends on second.
        let mut state = model.joint_init(&mut tape);
        for w in [2, 3] {
            model
                .apply_shift(&mut tape, &store, &mut state, &enc, move |_, _| Ok(w))
                .unwrap();
        }
        model
            .apply_reduce(&mut tape, &store, &mut state, Action::ReduceRight(2))
            .unwrap();
        assert_eq!(state.parser.arcs[0].dependent, 1);
        assert_eq!(state.parser.arcs[0].head, 0);
    }

    #[test]
    fn random_rollouts_keep_distribution_normalized_and_gating_exact() {
        let (store, model) = build(17, cfg());
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let len = rng.gen_range(2..=6);
            let tree = random_projective_tree(&mut rng, len, model.config.num_labels);
            let actions = tree_to_actions(&tree).unwrap();
            let mut tgt: Vec<usize> = (0..len - 1)
                .map(|_| rng.gen_range(2..model.config.tgt_vocab))
                .collect();
            tgt.push(crate::oracle::EOS_ID);

            let mut tape = Tape::new();
            let enc = model
                .encode(&mut tape, &store, &[2, crate::oracle::EOS_ID])
                .unwrap();
            let mut state = model.joint_init(&mut tape);
            for &action in &actions {
                // SHIFT count equals decoder step count at every prefix.
                assert_eq!(state.parser.shifted, state.decoder.steps);
                let dist = model
                    .action_distribution(&mut tape, &store, &state)
                    .unwrap();
                let sum: Real = dist.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
                match action {
                    Action::Shift => {
                        let gold = tgt[state.parser.shifted];
                        model
                            .apply_shift(&mut tape, &store, &mut state, &enc, move |_, _| Ok(gold))
                            .unwrap();
                    }
                    r => model
                        .apply_reduce(&mut tape, &store, &mut state, r)
                        .unwrap(),
                }
            }
            assert!(state.is_terminal());
            assert_eq!(state.parser.shifted, state.decoder.steps);
            assert_eq!(state.parser.arcs.len(), len - 1);
        }
    }

    #[test]
    fn joint_nll_counts_and_shift_mismatch_error() {
        let (store, model) = build(19, cfg());
        let mut tape = Tape::new();
        let src = [2, 3, crate::oracle::EOS_ID];
        let tgt = [4, crate::oracle::EOS_ID];
        let actions = [Action::Shift, Action::Shift, Action::ReduceLeft(0)];
        let loss = model
            .joint_nll(&mut tape, &store, &src, &tgt, &actions)
            .unwrap();
        assert_eq!(loss.word_count, 2);
        assert_eq!(loss.action_count, 3);
        let v = tape.scalar_value(loss.total).unwrap();
        assert!(v.is_finite() && v > 0.0);

        let mut tape2 = Tape::new();
        let bad = model.joint_nll(&mut tape2, &store, &src, &tgt, &actions[..2]);
        assert!(matches!(bad, Err(CoreError::Supervision { .. })));
    }

    #[test]
    fn perfect_model_has_zero_loss() {
        // Force probability ~1 on the gold symbols: single-word target (so
        // the only action ever legal is the gold one, contributing exactly
        // zero) and saturated output bias for the word.
        let (mut store, model) = build(29, cfg());
        store.value_mut(model.out_b).fill(-200.0);
        store.value_mut(model.out_b).data_mut()[EOS_ID] = 200.0;
        let mut tape = Tape::new();
        let loss = model
            .joint_nll(&mut tape, &store, &[EOS_ID], &[EOS_ID], &[Action::Shift])
            .unwrap();
        let v = tape.scalar_value(loss.total).unwrap();
        assert!(v.abs() < 1e-9, "loss = {v}");
    }

    #[test]
    fn dropping_action_terms_recovers_plain_translation_loss() {
        let (store, model) = build(31, cfg());
        let src = [4, 2, crate::oracle::EOS_ID];
        let tgt = [3, 5, crate::oracle::EOS_ID];
        let actions = [
            Action::Shift,
            Action::Shift,
            Action::ReduceRight(1),
            Action::Shift,
            Action::ReduceLeft(0),
        ];
        let mut tape = Tape::new();
        let joint = model
            .joint_nll(&mut tape, &store, &src, &tgt, &actions)
            .unwrap();
        let word_part = tape.scalar_value(joint.word_nll).unwrap();
        let mut tape2 = Tape::new();
        let (plain, count) = model.nmt_nll(&mut tape2, &store, &src, &tgt).unwrap();
        let plain_v = tape2.scalar_value(plain).unwrap();
        assert_eq!(count, joint.word_count);
        assert!((word_part - plain_v).abs() <= 1e-12);
    }

    #[test]
    fn ablated_component_has_no_influence_on_logits() {
        for (flags, which) in [
            (
                AblationFlags {
                    without_buffer: true,
                    ..Default::default()
                },
                0,
            ),
            (
                AblationFlags {
                    without_stack: true,
                    ..Default::default()
                },
                1,
            ),
            (
                AblationFlags {
                    without_action: true,
                    ..Default::default()
                },
                2,
            ),
        ] {
            let config = ModelConfig {
                ablation: flags,
                ..cfg()
            };
            let (store, model) = build(37, config);
            let mut rng = ChaCha8Rng::seed_from_u64(41);
            let mut tape = Tape::new();
            for _ in 0..20 {
                let d = model.config.hidden_dim;
                let mk = |tape: &mut Tape, rng: &mut ChaCha8Rng| {
                    let v: alloc::vec::Vec<Real> =
                        (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    tape.constant(Tensor::vector(v))
                };
                let h_dec = mk(&mut tape, &mut rng);
                let h_stack = mk(&mut tape, &mut rng);
                let h_act = mk(&mut tape, &mut rng);
                let base = model
                    .action_logits_from(&mut tape, &store, h_dec, h_stack, h_act)
                    .unwrap();
                // Perturb only the ablated component.
                let perturbed = mk(&mut tape, &mut rng);
                let (p_dec, p_stack, p_act) = match which {
                    0 => (perturbed, h_stack, h_act),
                    1 => (h_dec, perturbed, h_act),
                    _ => (h_dec, h_stack, perturbed),
                };
                let other = model
                    .action_logits_from(&mut tape, &store, p_dec, p_stack, p_act)
                    .unwrap();
                assert_eq!(tape.value(base).data(), tape.value(other).data());
            }
        }
    }

    #[test]
    fn joint_loss_passes_gradient_check() {
        let (mut store, model) = build(43, cfg());
        let src = [2, 4, crate::oracle::EOS_ID];
        let tgt = [3, 6, crate::oracle::EOS_ID];
        let actions = [
            Action::Shift,
            Action::Shift,
            Action::ReduceLeft(2),
            Action::Shift,
            Action::ReduceLeft(0),
        ];
        let report = crate::gradcheck::grad_check(
            &mut store,
            |store, tape| {
                let loss = model.joint_nll(tape, store, &src, &tgt, &actions)?;
                Ok(loss.total)
            },
            1e-5,
        )
        .unwrap();
        assert!(
            report.max_rel_err < 1e-4,
            "worst {} at {}[{}]",
            report.max_rel_err,
            report.worst_slot,
            report.worst_index
        );
    }

    #[test]
    fn word_and_action_gradients_add_up_to_joint_gradient() {
        let (mut store, model) = build(47, cfg());
        // The zero-initialized softmax weights block upstream gradient flow,
        // so move them off zero before probing the embedding's gradient.
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for id in [model.out_w, model.act_out_w] {
            for x in store.value_mut(id).data_mut() {
                *x = rng.gen_range(-0.1..=0.1);
            }
        }
        let src = [5, crate::oracle::EOS_ID];
        let tgt = [2, crate::oracle::EOS_ID];
        let actions = [Action::Shift, Action::Shift, Action::ReduceLeft(1)];

        let mut grads = |which: usize| {
            store.zero_grads();
            let mut tape = Tape::new();
            let loss = model
                .joint_nll(&mut tape, &store, &src, &tgt, &actions)
                .unwrap();
            let node = match which {
                0 => loss.total,
                1 => loss.word_nll,
                _ => loss.action_nll,
            };
            tape.backward(node, &mut store).unwrap();
            store.grad(model.tgt_embed).clone()
        };
        let total = grads(0);
        let words = grads(1);
        let acts = grads(2);
        for ((&t, &w), &a) in total.data().iter().zip(words.data()).zip(acts.data()) {
            assert!((t - (w + a)).abs() < 1e-12);
        }
        // The shared embedding receives signal through both paths.
        assert!(words.data().iter().any(|&x| x != 0.0));
        assert!(acts.data().iter().any(|&x| x != 0.0));
    }
}
