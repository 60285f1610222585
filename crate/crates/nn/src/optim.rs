use std::collections::BTreeMap;

use crate::params::{AdamState, GradStore, ParamStore};
use crate::tensor::{Scalar, Tensor};
use crate::NnError;

/// Optimizer configuration. State (Adam moments, step count) lives in the
/// [`ParamStore`] so snapshots carry it along.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerCfg<T> {
    Sgd { lr: T },
    Adam { lr: T, beta1: T, beta2: T, eps: T },
}

impl<T: Scalar> OptimizerCfg<T> {
    pub fn sgd(lr: T) -> Self {
        OptimizerCfg::Sgd { lr }
    }

    /// Adam with the usual β₁=0.9, β₂=0.999, ε=1e-8.
    pub fn adam(lr: T) -> Self {
        OptimizerCfg::Adam {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }
}

/// Applies one optimizer step in place. SGD is exactly `θ ← θ - lr·g`.
pub fn apply_gradients<T: Scalar>(
    params: &mut ParamStore<T>,
    grads: &GradStore<T>,
    cfg: &OptimizerCfg<T>,
) -> Result<(), NnError> {
    for (name, g) in grads.tensors() {
        let t = params.get(name)?;
        if t.shape() != g.shape() {
            return Err(NnError::ShapeMismatch {
                context: format!("gradient for `{name}`"),
                expected: t.shape().to_vec(),
                got: g.shape().to_vec(),
            });
        }
    }
    params.step += 1;
    match cfg {
        OptimizerCfg::Sgd { lr } => {
            for (name, g) in grads.tensors() {
                let t = params.get_mut(name)?;
                for (w, gv) in t.data_mut().iter_mut().zip(g.data()) {
                    *w = *w - *lr * *gv;
                }
            }
        }
        OptimizerCfg::Adam { lr, beta1, beta2, eps } => {
            if params.adam.is_none() {
                let zeros: BTreeMap<String, Tensor<T>> = grads
                    .tensors()
                    .iter()
                    .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape())))
                    .collect();
                params.adam = Some(AdamState { m: zeros.clone(), v: zeros });
            }
            let step = params.step;
            let bc1 = T::one() - beta1.powi(step as i32);
            let bc2 = T::one() - beta2.powi(step as i32);
            let mut adam = params.adam.take().expect("just initialized");
            for (name, g) in grads.tensors() {
                let m = adam.m.get_mut(name).ok_or_else(|| NnError::MissingParam(name.clone()))?;
                let v = adam.v.get_mut(name).ok_or_else(|| NnError::MissingParam(name.clone()))?;
                let t = params.get_mut(name)?;
                for i in 0..g.len() {
                    let gv = g.data()[i];
                    let mi = *beta1 * m.data()[i] + (T::one() - *beta1) * gv;
                    let vi = *beta2 * v.data()[i] + (T::one() - *beta2) * gv * gv;
                    m.data_mut()[i] = mi;
                    v.data_mut()[i] = vi;
                    let m_hat = mi / bc1;
                    let v_hat = vi / bc2;
                    t.data_mut()[i] = t.data()[i] - *lr * m_hat / (v_hat.sqrt() + *eps);
                }
            }
            params.adam = Some(adam);
        }
    }
    Ok(())
}
