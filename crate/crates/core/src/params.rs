//! Named parameter slots with gradient accumulators.
//!
//! Every trainable weight lives in exactly one slot; shared parameters (the
//! target word embeddings, used both as decoder input and as stack content)
//! are therefore represented once and receive additive gradient
//! contributions from all of their use sites.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

// Needed for sqrt in no_std builds; shadowed by the inherent method otherwise.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::tensor::{Real, Tensor};

/// Handle to a slot in a [`ParameterStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
struct Slot {
    name: String,
    value: Tensor,
    grad: Tensor,
}

#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    slots: Vec<Slot>,
    index: BTreeMap<String, usize>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a new slot. Names are unique: a shared parameter must be
    /// registered once and referenced from all of its use sites.
    pub fn add(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(CoreError::DuplicateParameter(name.to_string()));
        }
        let id = self.slots.len();
        let grad = Tensor::zeros(value.shape());
        self.slots.push(Slot {
            name: name.to_string(),
            value,
            grad,
        });
        self.index.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.index
            .get(name)
            .map(|&i| ParamId(i))
            .ok_or_else(|| CoreError::UnknownParameter(name.to_string()))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.slots[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.slots[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.slots[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.slots[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.slots[id.0].grad
    }

    /// Number of slots.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Total number of scalar parameters across all slots.
    pub fn num_scalars(&self) -> usize {
        self.slots.iter().map(|s| s.value.len()).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.slots.len()).map(ParamId)
    }

    pub fn zero_grads(&mut self) {
        for slot in self.slots.iter_mut() {
            slot.grad.fill(0.0);
        }
    }

    /// Global L2 norm over all gradient accumulators.
    pub fn grad_norm(&self) -> Real {
        let mut sq = 0.0;
        for slot in &self.slots {
            for &g in slot.grad.data() {
                sq += g * g;
            }
        }
        sq.sqrt()
    }

    /// Name of the first slot holding a non-finite gradient, if any.
    pub fn first_non_finite_grad(&self) -> Option<&str> {
        self.slots
            .iter()
            .find(|s| !s.grad.all_finite())
            .map(|s| s.name.as_str())
    }
}
