//! Bidirectional encoder, global attention, and the conditional language
//! model decoder step.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::lstm::LstmNodes;
use crate::model::Model;
use crate::oracle::EOS_ID;
use crate::params::ParameterStore;
use crate::tape::{NodeId, Tape};

/// Encoder states `h_1..h_N`, each the concatenation of the forward and
/// backward halves (`2 * hidden_dim` wide).
#[derive(Debug, Clone)]
pub struct SourceEncoding {
    pub states: Vec<NodeId>,
}

impl SourceEncoding {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Decoder state after one step: the LSTM state, the attention-combined
/// output fed to the softmax and the next step's input, the context vector,
/// and the attention weights over the source states.
#[derive(Debug, Clone, Copy)]
pub struct DecoderState {
    pub state: LstmNodes,
    pub combined: NodeId,
    pub context: Option<NodeId>,
    pub attention: Option<NodeId>,
    /// Number of decoder steps taken so far.
    pub steps: usize,
}

impl Model {
    /// Runs the forward cell left to right and the backward cell right to
    /// left, concatenating the two states at each position.
    pub fn encode(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        src: &[usize],
    ) -> Result<SourceEncoding> {
        if src.is_empty() {
            return Err(CoreError::EmptyInput("encode"));
        }
        for &id in src {
            if id >= self.config.src_vocab {
                return Err(CoreError::IdOutOfRange {
                    what: "source token",
                    id,
                    size: self.config.src_vocab,
                });
            }
        }
        let embeds: Vec<NodeId> = src
            .iter()
            .map(|&id| tape.param_row(store, self.src_embed, id))
            .collect::<Result<_>>()?;

        let mut fwd = Vec::with_capacity(src.len());
        let mut state = self.enc_fwd.initial(tape);
        for &x in &embeds {
            state = self.enc_fwd.step(tape, store, state, x)?;
            fwd.push(state.hidden);
        }
        let mut bwd = vec_rev_states(self, tape, store, &embeds)?;
        bwd.reverse();

        let states = fwd
            .into_iter()
            .zip(bwd)
            .map(|(f, b)| tape.concat(&[f, b]))
            .collect::<Result<_>>()?;
        Ok(SourceEncoding { states })
    }

    /// Attention over the encoder states: scores `h_i . (W s)`, softmax
    /// normalization, and the weighted-sum context vector. Returns
    /// `(weights, context)`.
    pub fn attend(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        decoder_hidden: NodeId,
        enc: &SourceEncoding,
    ) -> Result<(NodeId, NodeId)> {
        let w = tape.param(store, self.attn_w);
        let projected = tape.affine(w, decoder_hidden, None)?;
        let scores: Vec<NodeId> = enc
            .states
            .iter()
            .map(|&h| tape.dot(h, projected))
            .collect::<Result<_>>()?;
        let stacked = tape.stack(&scores)?;
        let alpha = tape.softmax(stacked)?;
        let context = tape.weighted_sum(alpha, &enc.states)?;
        Ok((alpha, context))
    }

    /// Initial decoder state: zero LSTM state and zero combined vector.
    pub fn decoder_init(&self, tape: &mut Tape) -> DecoderState {
        DecoderState {
            state: self.dec.initial(tape),
            combined: tape.zeros(self.config.hidden_dim),
            context: None,
            attention: None,
            steps: 0,
        }
    }

    /// One decoder step: advance the LSTM on the previous word embedding and
    /// the previous combined vector, attend, combine, and return the next
    /// state together with the log word distribution.
    pub fn decoder_step(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        prev: &DecoderState,
        prev_word: usize,
        enc: &SourceEncoding,
    ) -> Result<(DecoderState, NodeId)> {
        if prev_word >= self.config.tgt_vocab {
            return Err(CoreError::IdOutOfRange {
                what: "target token",
                id: prev_word,
                size: self.config.tgt_vocab,
            });
        }
        let embed = tape.param_row(store, self.tgt_embed, prev_word)?;
        let input = tape.concat(&[embed, prev.combined])?;
        let state = self.dec.step(tape, store, prev.state, input)?;
        let (alpha, context) = self.attend(tape, store, state.hidden, enc)?;
        let comb_w = tape.param(store, self.comb_w);
        let comb_b = tape.param(store, self.comb_b);
        let cat = tape.concat(&[state.hidden, context])?;
        let pre = tape.affine(comb_w, cat, Some(comb_b))?;
        let combined = tape.tanh(pre);
        let out_w = tape.param(store, self.out_w);
        let out_b = tape.param(store, self.out_b);
        let logits = tape.affine(out_w, combined, Some(out_b))?;
        let log_probs = tape.log_softmax(logits)?;
        Ok((
            DecoderState {
                state,
                combined,
                context: Some(context),
                attention: Some(alpha),
                steps: prev.steps + 1,
            },
            log_probs,
        ))
    }

    /// Teacher-forced negative log-likelihood of an EOS-terminated target
    /// under the translation path alone. Returns the loss node and the
    /// number of scored words.
    pub fn nmt_nll(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        src: &[usize],
        tgt: &[usize],
    ) -> Result<(NodeId, usize)> {
        if tgt.is_empty() {
            return Err(CoreError::EmptyInput("target sentence"));
        }
        let enc = self.encode(tape, store, src)?;
        let mut dec = self.decoder_init(tape);
        let mut terms = Vec::with_capacity(tgt.len());
        for (j, &word) in tgt.iter().enumerate() {
            let prev = if j == 0 { EOS_ID } else { tgt[j - 1] };
            let (next, log_probs) = self.decoder_step(tape, store, &dec, prev, &enc)?;
            terms.push(tape.pick(log_probs, word)?);
            dec = next;
        }
        let total = tape.sum_scalars(&terms)?;
        Ok((tape.neg(total), tgt.len()))
    }
}

fn vec_rev_states(
    model: &Model,
    tape: &mut Tape,
    store: &ParameterStore,
    embeds: &[NodeId],
) -> Result<Vec<NodeId>> {
    let mut out = Vec::with_capacity(embeds.len());
    let mut state = model.enc_bwd.initial(tape);
    for &x in embeds.iter().rev() {
        state = model.enc_bwd.step(tape, store, state, x)?;
        out.push(state.hidden);
    }
    Ok(out)
}
