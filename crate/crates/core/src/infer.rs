//! Decoding: translation-only beam search (the parser components are never
//! touched) and greedy joint translate-and-parse.

use alloc::vec::Vec;

// Needed for exp in no_std builds; shadowed by the inherent method otherwise.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::model::Model;
use crate::oracle::{actions_to_tree, DepTree, EOS_ID};
use crate::params::ParameterStore;
use crate::tape::Tape;
use crate::tensor::Real;
use crate::transition::{legal_action_indices, Action};

#[derive(Debug, Clone, Copy)]
pub struct BeamOptions {
    pub beam_width: usize,
    /// Hard cap on the number of generated words (EOS included).
    pub max_len: usize,
    /// Compare finished hypotheses by score / length instead of raw score.
    pub length_normalize: bool,
}

impl BeamOptions {
    pub fn new(beam_width: usize, max_len: usize) -> Self {
        BeamOptions {
            beam_width,
            max_len,
            length_normalize: false,
        }
    }
}

/// Best hypothesis found by beam search. `finished` is false only when no
/// hypothesis emitted EOS within the length bound (the caller may warn).
#[derive(Debug, Clone, PartialEq)]
pub struct BeamResult {
    /// Generated words, EOS excluded.
    pub tokens: Vec<usize>,
    /// Sum of the chosen per-step log-probabilities (EOS step included when
    /// finished).
    pub log_prob: Real,
    pub finished: bool,
}

struct Hyp {
    tokens: Vec<usize>,
    log_prob: Real,
    state: crate::encdec::DecoderState,
}

/// Deterministic hypothesis order: higher score first, then lexicographically
/// smaller token sequence. Exhaustive enumeration uses the same order.
fn better(score_a: Real, tokens_a: &[usize], score_b: Real, tokens_b: &[usize]) -> bool {
    match score_a.partial_cmp(&score_b) {
        Some(core::cmp::Ordering::Greater) => true,
        Some(core::cmp::Ordering::Less) => false,
        _ => tokens_a < tokens_b,
    }
}

impl Model {
    /// Length-bounded beam search over the translation path alone; no parser
    /// state is constructed.
    pub fn translate_beam(
        &self,
        store: &ParameterStore,
        src: &[usize],
        options: &BeamOptions,
    ) -> Result<BeamResult> {
        if options.beam_width == 0 || options.max_len == 0 {
            return Err(CoreError::Config(
                "beam width and max length must be at least 1".into(),
            ));
        }
        let mut tape = Tape::new();
        let enc = self.encode(&mut tape, store, src)?;
        let mut live = alloc::vec![Hyp {
            tokens: Vec::new(),
            log_prob: 0.0,
            state: self.decoder_init(&mut tape),
        }];
        let mut finished: Vec<(Vec<usize>, Real)> = Vec::new();

        for _ in 0..options.max_len {
            // (score, tokens-with-candidate, state) for every expansion.
            let mut candidates: Vec<(Real, Vec<usize>, crate::encdec::DecoderState)> = Vec::new();
            for hyp in &live {
                let prev = hyp.tokens.last().copied().unwrap_or(EOS_ID);
                let (next_state, log_probs) =
                    self.decoder_step(&mut tape, store, &hyp.state, prev, &enc)?;
                for (token, &lp) in tape.value(log_probs).data().iter().enumerate() {
                    let mut tokens = hyp.tokens.clone();
                    tokens.push(token);
                    candidates.push((hyp.log_prob + lp, tokens, next_state));
                }
            }
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            candidates.truncate(options.beam_width);

            let mut next_live = Vec::new();
            for (score, tokens, state) in candidates {
                if tokens.last() == Some(&EOS_ID) {
                    finished.push((tokens, score));
                } else {
                    next_live.push(Hyp {
                        tokens,
                        log_prob: score,
                        state,
                    });
                }
            }
            live = next_live;
            if live.is_empty() {
                break;
            }
        }

        let normalize = |tokens: &[usize], score: Real| {
            if options.length_normalize {
                score / tokens.len().max(1) as Real
            } else {
                score
            }
        };

        let mut best: Option<(Vec<usize>, Real)> = None;
        for (tokens, score) in finished {
            let replace = match &best {
                None => true,
                Some((bt, bs)) => {
                    better(normalize(&tokens, score), &tokens, normalize(bt, *bs), bt)
                }
            };
            if replace {
                best = Some((tokens, score));
            }
        }
        if let Some((mut tokens, score)) = best {
            tokens.pop(); // strip EOS
            return Ok(BeamResult {
                tokens,
                log_prob: score,
                finished: true,
            });
        }

        // Nothing finished within the bound: return the best live prefix.
        let mut best: Option<(Vec<usize>, Real)> = None;
        for hyp in live {
            let replace = match &best {
                None => true,
                Some((bt, bs)) => better(hyp.log_prob, &hyp.tokens, *bs, bt),
            };
            if replace {
                best = Some((hyp.tokens, hyp.log_prob));
            }
        }
        let (tokens, log_prob) = best.expect("at least one live hypothesis");
        Ok(BeamResult {
            tokens,
            log_prob,
            finished: false,
        })
    }

    /// Teacher-forced log-probability of an EOS-terminated target sequence
    /// under the translation path.
    pub fn score_sequence(
        &self,
        store: &ParameterStore,
        src: &[usize],
        tgt: &[usize],
    ) -> Result<Real> {
        let mut tape = Tape::new();
        let (nll, _) = self.nmt_nll(&mut tape, store, src, tgt)?;
        Ok(-tape.scalar_value(nll)?)
    }

    /// Greedy joint decoding: argmax over legal actions at every step and,
    /// on SHIFT, argmax word emission. Stops at the terminal parser state or
    /// after `max_actions` transitions (then `complete` is false).
    pub fn translate_and_parse_greedy(
        &self,
        store: &ParameterStore,
        src: &[usize],
        max_actions: usize,
    ) -> Result<JointDecodeResult> {
        self.greedy_joint(store, src, max_actions, None)
    }

    /// Greedy joint decoding with a hard word cap: once `max_words` words
    /// are out, SHIFT is masked and the remaining reduces drain the stack,
    /// so the decode always reaches a terminal state and yields a tree.
    /// The first emitted word is also constrained away from EOS so the
    /// parse is never empty (parse files cannot represent zero-row
    /// sentences).
    pub fn translate_and_parse_capped(
        &self,
        store: &ParameterStore,
        src: &[usize],
        max_words: usize,
    ) -> Result<JointDecodeResult> {
        self.greedy_joint(store, src, 2 * max_words.max(2), Some(max_words.max(2)))
    }

    fn greedy_joint(
        &self,
        store: &ParameterStore,
        src: &[usize],
        max_actions: usize,
        word_cap: Option<usize>,
    ) -> Result<JointDecodeResult> {
        let mut tape = Tape::new();
        let enc = self.encode(&mut tape, store, src)?;
        let mut state = self.joint_init(&mut tape);
        let mut actions = Vec::new();

        let can_shift = |state: &crate::transition::JointState| {
            state.can_shift() && word_cap.is_none_or(|cap| state.words.len() < cap)
        };
        while !crate::transition::is_terminal(state.parser.depth(), can_shift(&state))
            && actions.len() < max_actions
        {
            let legal = legal_action_indices(
                state.parser.depth(),
                can_shift(&state),
                self.config.num_labels,
            );
            if legal.is_empty() {
                return Err(CoreError::NoLegalAction {
                    step: actions.len(),
                });
            }
            let log_probs = self.action_log_probs(&mut tape, store, &state, &legal)?;
            let pos = argmax(tape.value(log_probs).data());
            let action = Action::from_index(legal[pos], self.config.num_labels)?;
            match action {
                Action::Shift => {
                    let forbid_eos = word_cap.is_some() && state.words.is_empty();
                    self.apply_shift(&mut tape, store, &mut state, &enc, |tape, node| {
                        let values = tape.value(node).data();
                        if forbid_eos {
                            Ok(argmax_excluding(values, EOS_ID))
                        } else {
                            Ok(argmax(values))
                        }
                    })?;
                }
                reduce => self.apply_reduce(&mut tape, store, &mut state, reduce)?,
            }
            actions.push(action);
        }

        let complete = crate::transition::is_terminal(state.parser.depth(), can_shift(&state));
        let tree = if complete {
            Some(actions_to_tree(&actions, state.words.len())?)
        } else {
            None
        };
        Ok(JointDecodeResult {
            words: state.words,
            actions,
            tree,
            complete,
        })
    }
}

/// Greedy joint decode output: generated words (EOS included as the last
/// token when complete), the action sequence, and the decoded tree.
#[derive(Debug, Clone)]
pub struct JointDecodeResult {
    pub words: Vec<usize>,
    pub actions: Vec<Action>,
    pub tree: Option<DepTree>,
    pub complete: bool,
}

/// First index of the maximum value (ties break to the lowest id).
pub fn argmax(values: &[Real]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn argmax_excluding(values: &[Real], excluded: usize) -> usize {
    let mut best = None;
    for (i, &v) in values.iter().enumerate() {
        if i == excluded {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) if v > values[b] => best = Some(i),
            _ => {}
        }
    }
    best.unwrap_or(excluded)
}

/// Exhaustively scores every EOS-terminated sequence up to `max_len` words
/// and returns the best under the same order as the beam. Test oracle for
/// beam optimality; independent of the beam implementation.
pub fn exhaustive_best(
    model: &Model,
    store: &ParameterStore,
    src: &[usize],
    max_len: usize,
) -> Result<BeamResult> {
    let vocab = model.config.tgt_vocab;
    let mut best: Option<(Vec<usize>, Real)> = None;
    let mut prefix: Vec<usize> = Vec::new();
    search(model, store, src, max_len, vocab, &mut prefix, &mut best)?;
    let (mut tokens, log_prob) = best.expect("EOS alone is always a candidate");
    tokens.pop();
    Ok(BeamResult {
        tokens,
        log_prob,
        finished: true,
    })
}

fn search(
    model: &Model,
    store: &ParameterStore,
    src: &[usize],
    max_len: usize,
    vocab: usize,
    prefix: &mut Vec<usize>,
    best: &mut Option<(Vec<usize>, Real)>,
) -> Result<()> {
    if prefix.len() >= max_len {
        return Ok(());
    }
    for token in 0..vocab {
        prefix.push(token);
        if token == EOS_ID {
            let score = model.score_sequence(store, src, prefix)?;
            let replace = match best {
                None => true,
                Some((bt, bs)) => better(score, prefix, *bs, bt),
            };
            if replace {
                *best = Some((prefix.clone(), score));
            }
        } else {
            search(model, store, src, max_len, vocab, prefix, best)?;
        }
        prefix.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AblationFlags, ModelConfig};
    use crate::trainer::init_parameters;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> ModelConfig {
        ModelConfig {
            src_vocab: 5,
            tgt_vocab: 4,
            num_labels: 2,
            word_dim: 3,
            action_dim: 2,
            hidden_dim: 3,
            ablation: AblationFlags::default(),
        }
    }

    fn randomized(seed: u64) -> (ParameterStore, Model) {
        // Move the zero-initialized softmax weights off zero so decoding is
        // not a wall of ties, and bias toward EOS so hypotheses finish.
        let (mut store, model) = init_parameters(cfg(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead);
        for id in [model.out_w, model.out_b, model.act_out_w, model.act_out_b] {
            for x in store.value_mut(id).data_mut() {
                *x = rng.gen_range(-0.5..0.5);
            }
        }
        store.value_mut(model.out_b).data_mut()[EOS_ID] += 1.0;
        (store, model)
    }

    #[test]
    fn beam_one_equals_stepwise_greedy() {
        for seed in [3, 5, 8] {
            let (store, model) = randomized(seed);
            let src = [2, 3, EOS_ID];
            let beam = model
                .translate_beam(&store, &src, &BeamOptions::new(1, 10))
                .unwrap();

            // Independent greedy loop with the same length bound.
            let mut tape = Tape::new();
            let enc = model.encode(&mut tape, &store, &src).unwrap();
            let mut dec = model.decoder_init(&mut tape);
            let mut tokens = Vec::new();
            let mut finished = false;
            for _ in 0..10 {
                let prev = tokens.last().copied().unwrap_or(EOS_ID);
                let (next, lp) = model
                    .decoder_step(&mut tape, &store, &dec, prev, &enc)
                    .unwrap();
                let tok = argmax(tape.value(lp).data());
                if tok == EOS_ID {
                    finished = true;
                    break;
                }
                tokens.push(tok);
                dec = next;
            }
            assert_eq!(beam.tokens, tokens);
            assert_eq!(beam.finished, finished);
        }
    }

    #[test]
    fn wider_beam_never_scores_worse() {
        for seed in [5, 7, 11] {
            let (store, model) = randomized(seed);
            let src = [3, EOS_ID];
            let mut prev_score = Real::NEG_INFINITY;
            for width in [1, 2, 4, 16, 64] {
                let r = model
                    .translate_beam(&store, &src, &BeamOptions::new(width, 4))
                    .unwrap();
                assert!(r.log_prob >= prev_score - 1e-12);
                prev_score = r.log_prob;
            }
        }
    }

    #[test]
    fn full_width_beam_matches_exhaustive_enumeration() {
        for seed in 0..5 {
            let (store, model) = randomized(seed);
            let src = [2, 4, EOS_ID];
            let max_len = 3;
            let width = model.config.tgt_vocab.pow(max_len as u32);
            let beam = model
                .translate_beam(&store, &src, &BeamOptions::new(width, max_len))
                .unwrap();
            let exact = exhaustive_best(&model, &store, &src, max_len).unwrap();
            assert_eq!(beam.tokens, exact.tokens);
            assert!((beam.log_prob - exact.log_prob).abs() < 1e-12);
        }
    }

    #[test]
    fn beam_score_is_recomputable() {
        let (store, model) = randomized(13);
        let src = [4, 2, EOS_ID];
        let r = model
            .translate_beam(&store, &src, &BeamOptions::new(3, 8))
            .unwrap();
        assert!(r.finished);
        let mut tgt = r.tokens.clone();
        tgt.push(EOS_ID);
        let rescored = model.score_sequence(&store, &src, &tgt).unwrap();
        assert!((rescored - r.log_prob).abs() < 1e-9);
    }

    #[test]
    fn greedy_output_is_locally_optimal_at_every_step() {
        // Replaying the width-1 output teacher-forced, the chosen token's
        // log-probability dominates every alternative at its own step.
        let (store, model) = randomized(19);
        let src = [2, 4, 3, EOS_ID];
        let r = model
            .translate_beam(&store, &src, &BeamOptions::new(1, 8))
            .unwrap();
        let mut tgt = r.tokens.clone();
        if r.finished {
            tgt.push(EOS_ID);
        }
        let mut tape = Tape::new();
        let enc = model.encode(&mut tape, &store, &src).unwrap();
        let mut dec = model.decoder_init(&mut tape);
        for (j, &chosen) in tgt.iter().enumerate() {
            let prev = if j == 0 { EOS_ID } else { tgt[j - 1] };
            let (next, lp) = model
                .decoder_step(&mut tape, &store, &dec, prev, &enc)
                .unwrap();
            let values = tape.value(lp).data();
            for &alt in values {
                assert!(values[chosen] >= alt);
            }
            dec = next;
        }
    }

    #[test]
    fn zeroing_parser_parameters_leaves_beam_output_unchanged() {
        let (store, model) = randomized(17);
        let src = [2, 3, 4, EOS_ID];
        let opts = BeamOptions::new(4, 12);
        let before = model.translate_beam(&store, &src, &opts).unwrap();
        let mut zeroed = store.clone();
        for id in model.parser_param_ids() {
            zeroed.value_mut(id).fill(0.0);
        }
        let after = model.translate_beam(&zeroed, &src, &opts).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn greedy_joint_decode_is_deterministic_and_wellformed() {
        let (store, model) = randomized(23);
        let src = [3, 2, EOS_ID];
        let a = model.translate_and_parse_greedy(&store, &src, 64).unwrap();
        let b = model.translate_and_parse_greedy(&store, &src, 64).unwrap();
        assert_eq!(a.words, b.words);
        assert_eq!(a.actions, b.actions);
        if a.complete {
            let shifts = a
                .actions
                .iter()
                .filter(|x| matches!(x, Action::Shift))
                .count();
            assert_eq!(shifts, a.words.len());
            assert_eq!(a.actions.len(), 2 * a.words.len() - 1);
            assert_eq!(*a.words.last().unwrap(), EOS_ID);
            let tree = a.tree.unwrap();
            assert_eq!(tree.len(), a.words.len());
        }
    }

    #[test]
    fn capped_joint_decode_always_completes() {
        // Even the degenerate shift-forever model terminates under a word
        // cap, with a tree over exactly the emitted words.
        let (store, model) = init_parameters(cfg(), 31).unwrap();
        let r = model
            .translate_and_parse_capped(&store, &[2, EOS_ID], 4)
            .unwrap();
        assert!(r.complete);
        assert_eq!(r.words.len(), 4);
        let tree = r.tree.unwrap();
        assert_eq!(tree.len(), 4);
    }

    #[test]
    fn greedy_joint_budget_exhaustion_is_flagged() {
        // A fresh model emits uniform distributions, so argmax with
        // lowest-id tie-breaking shifts UNK forever and never terminates.
        let (store, model) = init_parameters(cfg(), 29).unwrap();
        let r = model
            .translate_and_parse_greedy(&store, &[2, EOS_ID], 5)
            .unwrap();
        assert!(!r.complete);
        assert!(r.tree.is_none());
        assert_eq!(r.actions.len(), 5);
    }
}
