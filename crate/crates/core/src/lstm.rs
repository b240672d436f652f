//! LSTM cell and stack LSTM on the tape.
//!
//! Gate order inside the packed `[4d]` preactivation is input, forget, cell
//! candidate, output; the forget-gate rows of the bias are initialized to 1.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::params::{ParamId, ParameterStore};
use crate::tape::{NodeId, Tape};
use crate::tensor::{Real, Tensor};

/// Slot handles for one LSTM cell.
#[derive(Debug, Clone, Copy)]
pub struct LstmParams {
    pub wx: ParamId,
    pub wh: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// Hidden/cell pair of one LSTM state, as tape nodes.
#[derive(Debug, Clone, Copy)]
pub struct LstmNodes {
    pub hidden: NodeId,
    pub cell: NodeId,
}

fn uniform_tensor<R: Rng>(shape: &[usize], scale: Real, rng: &mut R) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for x in t.data_mut() {
        *x = rng.gen_range(-scale..=scale);
    }
    t
}

impl LstmParams {
    /// Registers `<prefix>.wx`, `<prefix>.wh` and `<prefix>.b`. Weights are
    /// uniform in `[-scale, scale]`, biases zero except the forget gate.
    pub fn register<R: Rng>(
        store: &mut ParameterStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        scale: Real,
        rng: &mut R,
    ) -> Result<LstmParams> {
        let wx = store.add(
            &format!("{prefix}.wx"),
            uniform_tensor(&[4 * hidden_dim, input_dim], scale, rng),
        )?;
        let wh = store.add(
            &format!("{prefix}.wh"),
            uniform_tensor(&[4 * hidden_dim, hidden_dim], scale, rng),
        )?;
        let mut b = Tensor::zeros(&[4 * hidden_dim]);
        for k in hidden_dim..2 * hidden_dim {
            b.data_mut()[k] = 1.0;
        }
        let bias = store.add(&format!("{prefix}.b"), b)?;
        Ok(LstmParams {
            wx,
            wh,
            bias,
            input_dim,
            hidden_dim,
        })
    }

    /// Binds to already registered slots (checkpoint reload).
    pub fn from_store(
        store: &ParameterStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
    ) -> Result<LstmParams> {
        let wx = store.id(&format!("{prefix}.wx"))?;
        let wh = store.id(&format!("{prefix}.wh"))?;
        let bias = store.id(&format!("{prefix}.b"))?;
        Ok(LstmParams {
            wx,
            wh,
            bias,
            input_dim,
            hidden_dim,
        })
    }

    /// Zero state as tape constants.
    pub fn initial(&self, tape: &mut Tape) -> LstmNodes {
        LstmNodes {
            hidden: tape.zeros(self.hidden_dim),
            cell: tape.zeros(self.hidden_dim),
        }
    }

    /// One step: `i,f,o = sigmoid(.)`, `g = tanh(.)`,
    /// `c' = f*c + i*g`, `h' = o * tanh(c')`.
    pub fn step(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        state: LstmNodes,
        input: NodeId,
    ) -> Result<LstmNodes> {
        if tape.value(input).shape() != [self.input_dim] {
            return Err(CoreError::ShapeMismatch {
                op: "lstm input",
                left: alloc::vec![self.input_dim],
                right: tape.value(input).shape().to_vec(),
            });
        }
        let wx = tape.param(store, self.wx);
        let wh = tape.param(store, self.wh);
        let b = tape.param(store, self.bias);
        let gx = tape.affine(wx, input, Some(b))?;
        let gh = tape.affine(wh, state.hidden, None)?;
        let pre = tape.add(gx, gh)?;
        let d = self.hidden_dim;
        let pi = tape.slice(pre, 0, d)?;
        let pf = tape.slice(pre, d, d)?;
        let pg = tape.slice(pre, 2 * d, d)?;
        let po = tape.slice(pre, 3 * d, d)?;
        let i = tape.sigmoid(pi);
        let f = tape.sigmoid(pf);
        let g = tape.tanh(pg);
        let o = tape.sigmoid(po);
        let fc = tape.mul(f, state.cell)?;
        let ig = tape.mul(i, g)?;
        let cell = tape.add(fc, ig)?;
        let tc = tape.tanh(cell);
        let hidden = tape.mul(o, tc)?;
        Ok(LstmNodes { hidden, cell })
    }
}

/// An LSTM whose state history forms a stack. Pushing steps the cell from
/// the current top; popping restores the previous top exactly (frames keep
/// their full hidden/cell pair, so restoration is O(1) and bit-identical).
#[derive(Debug, Clone)]
pub struct StackLstm {
    params: LstmParams,
    init: LstmNodes,
    frames: Vec<LstmNodes>,
}

impl StackLstm {
    pub fn new(tape: &mut Tape, params: LstmParams) -> StackLstm {
        let init = params.initial(tape);
        StackLstm {
            params,
            init,
            frames: Vec::new(),
        }
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    /// Current top state; the fixed zero state when empty.
    pub fn top(&self) -> LstmNodes {
        *self.frames.last().unwrap_or(&self.init)
    }

    pub fn push(&mut self, tape: &mut Tape, store: &ParameterStore, input: NodeId) -> Result<()> {
        let next = self.params.step(tape, store, self.top(), input)?;
        self.frames.push(next);
        Ok(())
    }

    pub fn pop(&mut self) -> Result<LstmNodes> {
        self.frames.pop().ok_or(CoreError::StackUnderflow)
    }
}
