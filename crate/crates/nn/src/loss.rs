use rand::RngCore;

use crate::forward::{backward, run_trace, Mode};
use crate::params::{GradStore, ParamStore};
use crate::spec::NetworkSpec;
use crate::tensor::{Scalar, Tensor};
use crate::NnError;

/// The three training objectives used by the self-play algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `-Σ π log p` against a target distribution (or one-hot action).
    CrossEntropy,
    /// `(y - Q(s, a))²` on a single action's output.
    MseQ,
    /// Cross-entropy plus `(v - z)²` for policy-value networks.
    PolicyValueCombined,
}

/// `(s, π)` pairs for [`LossKind::CrossEntropy`].
#[derive(Debug, Clone)]
pub struct CrossEntropyBatch<T> {
    pub inputs: Vec<Tensor<T>>,
    pub targets: Vec<Vec<T>>,
}

/// `(s, a, y)` triples for [`LossKind::MseQ`]. `y` is the (already computed)
/// TD target: `r` at terminals, `r + γ·max Q'` otherwise.
#[derive(Debug, Clone)]
pub struct QBatch<T> {
    pub inputs: Vec<Tensor<T>>,
    pub actions: Vec<usize>,
    pub targets: Vec<T>,
}

/// `(s, π, z)` triples for [`LossKind::PolicyValueCombined`].
#[derive(Debug, Clone)]
pub struct PolicyValueBatch<T> {
    pub inputs: Vec<Tensor<T>>,
    pub policies: Vec<Vec<T>>,
    pub outcomes: Vec<T>,
}

#[derive(Debug, Clone)]
pub enum LossBatch<T> {
    CrossEntropy(CrossEntropyBatch<T>),
    MseQ(QBatch<T>),
    PolicyValue(PolicyValueBatch<T>),
}

impl<T> LossBatch<T> {
    pub fn kind(&self) -> LossKind {
        match self {
            LossBatch::CrossEntropy(_) => LossKind::CrossEntropy,
            LossBatch::MseQ(_) => LossKind::MseQ,
            LossBatch::PolicyValue(_) => LossKind::PolicyValueCombined,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            LossBatch::CrossEntropy(b) => b.inputs.len(),
            LossBatch::MseQ(b) => b.inputs.len(),
            LossBatch::PolicyValue(b) => b.inputs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Mean loss over the batch and the matching parameter gradients.
///
/// Runs forward passes in train mode (dropout active, masks drawn from
/// `rng`). Cross-entropy terms backpropagate the fused `p - π` gradient at
/// the softmax input, so saturated policies cannot produce non-finite
/// gradients.
pub fn loss_and_gradients<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParamStore<T>,
    batch: &LossBatch<T>,
    rng: &mut dyn RngCore,
) -> Result<(T, GradStore<T>), NnError> {
    if batch.is_empty() {
        return Err(NnError::InvalidSpec("empty training batch".into()));
    }
    let batch_size = batch.len();
    let inv_b = T::lit(1.0 / batch_size as f64);
    let mut grads = GradStore::zeros_like(params);
    let mut total_loss = T::zero();

    match batch {
        LossBatch::CrossEntropy(b) => {
            if b.targets.len() != batch_size {
                return Err(NnError::InvalidSpec("target count != input count".into()));
            }
            if !spec.policy_is_distribution() {
                return Err(NnError::InvalidSpec(
                    "cross-entropy loss requires a softmax policy head".into(),
                ));
            }
            for (x, target) in b.inputs.iter().zip(&b.targets) {
                let trace = run_trace(spec, params, x, Mode::Train(rng))?;
                let p = &trace.policy.output;
                check_target_len(target.len(), p.len())?;
                total_loss += cross_entropy_value(target, p);
                let grad_logits = softmax_ce_grad(target, p, inv_b)?;
                backward(spec, params, &trace, &grad_logits, true, None, &mut grads)?;
            }
        }
        LossBatch::MseQ(b) => {
            if b.actions.len() != batch_size || b.targets.len() != batch_size {
                return Err(NnError::InvalidSpec("ragged q batch".into()));
            }
            for ((x, &action), &y) in b.inputs.iter().zip(&b.actions).zip(&b.targets) {
                let trace = run_trace(spec, params, x, Mode::Train(rng))?;
                let q = &trace.policy.output;
                if action >= q.len() {
                    return Err(NnError::InvalidSpec(format!(
                        "action index {action} out of range {}",
                        q.len()
                    )));
                }
                let resid = q.data()[action] - y;
                total_loss += resid * resid;
                let mut grad_q = Tensor::zeros(&[q.len()]);
                grad_q.data_mut()[action] = T::lit(2.0) * resid * inv_b;
                backward(spec, params, &trace, &grad_q, false, None, &mut grads)?;
            }
        }
        LossBatch::PolicyValue(b) => {
            if b.policies.len() != batch_size || b.outcomes.len() != batch_size {
                return Err(NnError::InvalidSpec("ragged policy-value batch".into()));
            }
            if !spec.policy_is_distribution() || !spec.has_value_head() {
                return Err(NnError::InvalidSpec(
                    "policy-value loss requires softmax policy and value heads".into(),
                ));
            }
            for ((x, target), &z) in b.inputs.iter().zip(&b.policies).zip(&b.outcomes) {
                let trace = run_trace(spec, params, x, Mode::Train(rng))?;
                let p = &trace.policy.output;
                check_target_len(target.len(), p.len())?;
                let v = trace.value.as_ref().expect("value head").output.data()[0];
                let value_err = v - z;
                total_loss += cross_entropy_value(target, p) + value_err * value_err;
                let grad_logits = softmax_ce_grad(target, p, inv_b)?;
                let grad_value = T::lit(2.0) * value_err * inv_b;
                backward(spec, params, &trace, &grad_logits, true, Some(grad_value), &mut grads)?;
            }
        }
    }

    let loss = total_loss * inv_b;
    if !loss.is_finite() || !grads.is_finite() {
        return Err(NnError::NonFinite {
            context: format!("{:?} loss", batch.kind()),
            batch_size,
        });
    }
    Ok((loss, grads))
}

fn check_target_len(target: usize, policy: usize) -> Result<(), NnError> {
    if target != policy {
        return Err(NnError::ShapeMismatch {
            context: "loss target".into(),
            expected: vec![policy],
            got: vec![target],
        });
    }
    Ok(())
}

fn cross_entropy_value<T: Scalar>(target: &[T], p: &Tensor<T>) -> T {
    let floor = T::lit(1e-30);
    let mut loss = T::zero();
    for (pi, pv) in target.iter().zip(p.data()) {
        if *pi > T::zero() {
            loss = loss - *pi * pv.max(floor).ln();
        }
    }
    loss
}

/// Gradient of cross-entropy w.r.t. the softmax *input*: `(p - π) / B`.
fn softmax_ce_grad<T: Scalar>(target: &[T], p: &Tensor<T>, inv_b: T) -> Result<Tensor<T>, NnError> {
    let mut g = Tensor::zeros(&[p.len()]);
    for ((gv, pv), pi) in g.data_mut().iter_mut().zip(p.data()).zip(target) {
        *gv = (*pv - *pi) * inv_b;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{init_params, zero_params};
    use crate::spec::LayerSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dist_spec(outputs: usize) -> NetworkSpec {
        NetworkSpec::new(
            vec![3],
            vec![LayerSpec::Dense { inputs: 3, outputs: 5 }, LayerSpec::Relu],
            vec![LayerSpec::Dense { inputs: 5, outputs: outputs }, LayerSpec::Softmax],
            None,
        )
        .unwrap()
    }

    #[test]
    fn cross_entropy_at_optimum_has_zero_gradient_and_entropy_loss() {
        // Zero weights emit the uniform distribution; training toward the
        // uniform target must already be at the optimum.
        let spec = dist_spec(4);
        let params = zero_params::<f64>(&spec);
        let target = vec![0.25; 4];
        let batch = LossBatch::CrossEntropy(CrossEntropyBatch {
            inputs: vec![Tensor::from_vec(&[3], vec![0.1, 0.2, 0.3]).unwrap()],
            targets: vec![target.clone()],
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (loss, grads) = loss_and_gradients(&spec, &params, &batch, &mut rng).unwrap();
        let entropy: f64 = -target.iter().map(|p| p * p.ln()).sum::<f64>();
        assert!((loss - entropy).abs() < 1e-12);
        assert!(grads.max_abs() < 1e-12);
    }

    #[test]
    fn mse_q_zero_residual_gives_zero_loss() {
        let spec = NetworkSpec::new(
            vec![2],
            vec![],
            vec![LayerSpec::Dense { inputs: 2, outputs: 3 }],
            None,
        )
        .unwrap();
        let params = zero_params::<f64>(&spec);
        let batch = LossBatch::MseQ(QBatch {
            inputs: vec![Tensor::from_vec(&[2], vec![1.0, -1.0]).unwrap()],
            actions: vec![1],
            targets: vec![0.0],
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (loss, grads) = loss_and_gradients(&spec, &params, &batch, &mut rng).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.max_abs() == 0.0);
    }

    #[test]
    fn policy_value_loss_decomposes() {
        let spec = NetworkSpec::new(
            vec![3],
            vec![LayerSpec::Dense { inputs: 3, outputs: 4 }, LayerSpec::Relu],
            vec![LayerSpec::Dense { inputs: 4, outputs: 2 }, LayerSpec::Softmax],
            Some(vec![LayerSpec::Dense { inputs: 4, outputs: 1 }, LayerSpec::Tanh]),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = init_params::<f64>(&spec, &mut rng);
        let x = Tensor::from_vec(&[3], vec![0.4, -0.2, 0.9]).unwrap();
        let target = vec![0.7, 0.3];
        let z = 1.0;

        let out = crate::forward(&spec, &params, &x, Mode::Eval).unwrap();
        let ce: f64 = -target
            .iter()
            .zip(out.policy.data())
            .map(|(pi, p)| pi * p.ln())
            .sum::<f64>();
        let ve = (out.value.unwrap() - z).powi(2);

        let batch = LossBatch::PolicyValue(PolicyValueBatch {
            inputs: vec![x],
            policies: vec![target],
            outcomes: vec![z],
        });
        let (loss, _) = loss_and_gradients(&spec, &params, &batch, &mut rng).unwrap();
        assert!((loss - (ce + ve)).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_rejected() {
        let spec = dist_spec(2);
        let params = zero_params::<f64>(&spec);
        let batch = LossBatch::CrossEntropy(CrossEntropyBatch { inputs: vec![], targets: vec![] });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(loss_and_gradients(&spec, &params, &batch, &mut rng).is_err());
    }
}
