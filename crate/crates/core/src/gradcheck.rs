//! Gradient verification against central finite differences.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::params::ParameterStore;
use crate::tape::{NodeId, Tape};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub loss: Real,
    pub max_rel_err: Real,
    pub worst_slot: String,
    pub worst_index: usize,
    pub checked: usize,
}

/// Compares analytic gradients of a scalar loss against central finite
/// differences over every scalar in the store. The relative error is
/// `|analytic - numeric| / max(1, |analytic|)`; the report carries the worst
/// offender by slot name.
#[allow(clippy::unnecessary_cast)] // identity cast unless Real is f32
pub fn grad_check<F>(
    store: &mut ParameterStore,
    mut build: F,
    epsilon: Real,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParameterStore, &mut Tape) -> Result<NodeId>,
{
    if !(1e-6..=1e-3).contains(&(epsilon as f64)) {
        return Err(CoreError::Config(format!(
            "gradcheck epsilon {epsilon} outside [1e-6, 1e-3]"
        )));
    }

    let mut tape = Tape::new();
    let loss_node = build(store, &mut tape)?;
    let loss = tape.scalar_value(loss_node)?;
    if !loss.is_finite() {
        return Err(CoreError::NonFinite {
            context: "gradcheck loss".into(),
        });
    }
    store.zero_grads();
    tape.backward(loss_node, store)?;
    let analytic: Vec<Tensor> = store.ids().map(|id| store.grad(id).clone()).collect();

    let mut report = GradCheckReport {
        loss,
        max_rel_err: 0.0,
        worst_slot: String::new(),
        worst_index: 0,
        checked: 0,
    };

    let ids: Vec<_> = store.ids().collect();
    for (slot_idx, &id) in ids.iter().enumerate() {
        let n = store.value(id).len();
        for k in 0..n {
            let orig = store.value(id).data()[k];

            store.value_mut(id).data_mut()[k] = orig + epsilon;
            let plus = eval_loss(store, &mut build)?;
            store.value_mut(id).data_mut()[k] = orig - epsilon;
            let minus = eval_loss(store, &mut build)?;
            store.value_mut(id).data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[slot_idx].data()[k];
            let rel = (a - numeric).abs() / (1.0 as Real).max(a.abs());
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_slot = store.name(id).into();
                report.worst_index = k;
            }
        }
    }
    Ok(report)
}

fn eval_loss<F>(store: &ParameterStore, build: &mut F) -> Result<Real>
where
    F: FnMut(&ParameterStore, &mut Tape) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let node = build(store, &mut tape)?;
    let value = tape.scalar_value(node)?;
    if !value.is_finite() {
        return Err(CoreError::NonFinite {
            context: "gradcheck perturbed loss".into(),
        });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn quadratic_is_exact_under_central_differences() {
        // f(theta) = theta^2 at theta = 3: analytic 6, central difference 6.
        let mut store = ParameterStore::new();
        let theta = store.add("theta", Tensor::vector(vec![3.0])).unwrap();
        let report = grad_check(
            &mut store,
            |store, tape| {
                let t = tape.param(store, theta);
                tape.dot(t, t)
            },
            1e-4,
        )
        .unwrap();
        assert!(report.max_rel_err < 1e-9, "err = {}", report.max_rel_err);
        assert_eq!(report.checked, 1);
    }

    #[test]
    fn unused_parameter_has_exactly_zero_gradient() {
        let mut store = ParameterStore::new();
        let used = store.add("used", Tensor::vector(vec![2.0])).unwrap();
        let unused = store.add("unused", Tensor::vector(vec![5.0])).unwrap();
        let report = grad_check(
            &mut store,
            |store, tape| {
                let t = tape.param(store, used);
                tape.dot(t, t)
            },
            1e-4,
        )
        .unwrap();
        assert!(report.max_rel_err < 1e-9);
        assert_eq!(store.grad(unused).data(), &[0.0]);
    }

    #[test]
    fn epsilon_outside_range_rejected() {
        let mut store = ParameterStore::new();
        store.add("x", Tensor::vector(vec![1.0])).unwrap();
        let r = grad_check(&mut store, |_, tape| Ok(tape.zeros(1)), 1e-7);
        assert!(matches!(r, Err(CoreError::Config(_))));
    }

    #[test]
    fn hidden_forward_term_is_detected() {
        // Negative control: the closure adds a term the tape cannot see,
        // so analytic and numeric gradients must disagree.
        let mut store = ParameterStore::new();
        let theta = store.add("theta", Tensor::vector(vec![3.0])).unwrap();
        let report = grad_check(
            &mut store,
            |store, tape| {
                let t = tape.param(store, theta);
                let sq = tape.dot(t, t)?;
                let hidden = tape.constant(Tensor::scalar(0.5 * store.value(theta).data()[0]));
                tape.sum_scalars(&[sq, hidden])
            },
            1e-4,
        )
        .unwrap();
        assert!(report.max_rel_err > 1e-2, "corruption went undetected");
        assert_eq!(report.worst_slot, "theta");
    }
}
