use rand::{Rng, RngCore};

use crate::params::{GradStore, ParamStore};
use crate::spec::{LayerSpec, NetworkSpec};
use crate::tensor::{Scalar, Tensor};
use crate::NnError;

/// Dropout behaviour for a forward pass. Training passes need an RNG for the
/// dropout masks; evaluation passes run dropout as identity.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    /// Policy head output: a distribution when the head ends in softmax,
    /// raw action values otherwise.
    pub policy: Tensor<T>,
    /// Value head output in [-1, 1], present iff the spec has a value head.
    pub value: Option<T>,
}

/// Runs the network on one input. See [`Mode`] for dropout handling.
pub fn forward<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParamStore<T>,
    x: &Tensor<T>,
    mode: Mode,
) -> Result<ForwardOutput<T>, NnError> {
    let trace = run_trace(spec, params, x, mode)?;
    Ok(ForwardOutput {
        value: trace.value.as_ref().map(|v| v.output.data()[0]),
        policy: trace.policy.output.clone(),
    })
}

pub(crate) struct SectionTrace<T> {
    /// `inputs[i]` is the input to layer `i`.
    inputs: Vec<Tensor<T>>,
    /// Dropout keep-masks, recorded only for dropout layers in train mode.
    masks: Vec<Option<Vec<bool>>>,
    pub(crate) output: Tensor<T>,
}

pub(crate) struct Trace<T> {
    pub(crate) trunk: SectionTrace<T>,
    pub(crate) policy: SectionTrace<T>,
    pub(crate) value: Option<SectionTrace<T>>,
}

pub(crate) fn run_trace<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParamStore<T>,
    x: &Tensor<T>,
    mut mode: Mode,
) -> Result<Trace<T>, NnError> {
    if x.shape() != spec.input_shape {
        return Err(NnError::ShapeMismatch {
            context: "network input".into(),
            expected: spec.input_shape.clone(),
            got: x.shape().to_vec(),
        });
    }
    let trunk = run_section(&spec.trunk, "trunk", params, x.clone(), &mut mode)?;
    let policy = run_section(&spec.policy_head, "policy", params, trunk.output.clone(), &mut mode)?;
    let value = match &spec.value_head {
        Some(layers) => {
            Some(run_section(layers, "value", params, trunk.output.clone(), &mut mode)?)
        }
        None => None,
    };
    Ok(Trace { trunk, policy, value })
}

fn run_section<T: Scalar>(
    layers: &[LayerSpec],
    section: &str,
    params: &ParamStore<T>,
    input: Tensor<T>,
    mode: &mut Mode,
) -> Result<SectionTrace<T>, NnError> {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut masks = vec![None; layers.len()];
    let mut x = input;
    for (idx, layer) in layers.iter().enumerate() {
        let (y, mask) = layer_forward(layer, section, idx, params, &x, mode)?;
        inputs.push(x);
        masks[idx] = mask;
        x = y;
    }
    Ok(SectionTrace { inputs, masks, output: x })
}

fn layer_forward<T: Scalar>(
    layer: &LayerSpec,
    section: &str,
    idx: usize,
    params: &ParamStore<T>,
    x: &Tensor<T>,
    mode: &mut Mode,
) -> Result<(Tensor<T>, Option<Vec<bool>>), NnError> {
    let out_shape = layer.out_shape(x.shape())?;
    match layer {
        LayerSpec::Dense { inputs, outputs } => {
            let (wn, bn) = layer.param_names(section, idx).expect("dense has params");
            let w = params.get(&wn)?;
            let b = params.get(&bn)?;
            let mut y = Tensor::zeros(&out_shape);
            for o in 0..*outputs {
                let mut acc = b.data()[o];
                let row = &w.data()[o * inputs..(o + 1) * inputs];
                for (wi, xi) in row.iter().zip(x.data()) {
                    acc = acc + *wi * *xi;
                }
                y.data_mut()[o] = acc;
            }
            Ok((y, None))
        }
        LayerSpec::Conv2d { in_channels, out_channels, kernel } => {
            let (wn, bn) = layer.param_names(section, idx).expect("conv has params");
            let w = params.get(&wn)?;
            let b = params.get(&bn)?;
            let (h, wd) = (x.shape()[1], x.shape()[2]);
            let pad = (kernel - 1) / 2;
            let k = *kernel;
            let mut y = Tensor::zeros(&out_shape);
            for oc in 0..*out_channels {
                for r in 0..h {
                    for c in 0..wd {
                        let mut acc = b.data()[oc];
                        for ic in 0..*in_channels {
                            for kr in 0..k {
                                let rr = r + kr;
                                if rr < pad || rr - pad >= h {
                                    continue;
                                }
                                let rr = rr - pad;
                                for kc in 0..k {
                                    let cc = c + kc;
                                    if cc < pad || cc - pad >= wd {
                                        continue;
                                    }
                                    let cc = cc - pad;
                                    let wv = w.data()[((oc * in_channels + ic) * k + kr) * k + kc];
                                    let xv = x.data()[(ic * h + rr) * wd + cc];
                                    acc = acc + wv * xv;
                                }
                            }
                        }
                        y.data_mut()[(oc * h + r) * wd + c] = acc;
                    }
                }
            }
            Ok((y, None))
        }
        LayerSpec::Relu => {
            let mut y = x.clone();
            for v in y.data_mut() {
                if *v < T::zero() {
                    *v = T::zero();
                }
            }
            Ok((y, None))
        }
        LayerSpec::Softmax => Ok((softmax(x), None)),
        LayerSpec::Tanh => {
            let mut y = x.clone();
            for v in y.data_mut() {
                *v = v.tanh();
            }
            Ok((y, None))
        }
        LayerSpec::Dropout { rate } => match mode {
            Mode::Eval => Ok((x.clone(), None)),
            Mode::Train(rng) => {
                let keep_prob = 1.0 - rate;
                let scale = T::lit(1.0 / keep_prob);
                let mask: Vec<bool> = (0..x.len()).map(|_| rng.gen::<f64>() < keep_prob).collect();
                let mut y = x.clone();
                for (v, keep) in y.data_mut().iter_mut().zip(&mask) {
                    *v = if *keep { *v * scale } else { T::zero() };
                }
                Ok((y, Some(mask)))
            }
        },
        LayerSpec::Flatten => Ok((x.reshaped(&out_shape)?, None)),
    }
}

/// Numerically stable softmax over a flat tensor.
pub fn softmax<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let max = x.data().iter().cloned().fold(T::neg_infinity(), T::max);
    let mut y = x.clone();
    let mut sum = T::zero();
    for v in y.data_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in y.data_mut() {
        *v = *v / sum;
    }
    y
}

/// Backpropagates head gradients through the network, returning parameter
/// gradients.
///
/// `grad_policy` is the gradient w.r.t. the policy head output, except when
/// `policy_grad_pre_softmax` is set: then it is w.r.t. the input of the
/// head's final softmax layer (the fused cross-entropy path) and the softmax
/// layer itself is skipped.
pub(crate) fn backward<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParamStore<T>,
    trace: &Trace<T>,
    grad_policy: &Tensor<T>,
    policy_grad_pre_softmax: bool,
    grad_value: Option<T>,
    grads: &mut GradStore<T>,
) -> Result<(), NnError> {
    let skip = if policy_grad_pre_softmax {
        debug_assert_eq!(spec.policy_head.last(), Some(&LayerSpec::Softmax));
        1
    } else {
        0
    };
    let mut grad_trunk_out = backward_section(
        &spec.policy_head,
        "policy",
        params,
        &trace.policy,
        grad_policy.clone(),
        skip,
        grads,
    )?;
    if let (Some(value_layers), Some(value_trace), Some(gv)) =
        (&spec.value_head, &trace.value, grad_value)
    {
        let grad_from_value = backward_section(
            value_layers,
            "value",
            params,
            value_trace,
            Tensor::scalar(gv),
            0,
            grads,
        )?;
        grad_trunk_out.add_assign(&grad_from_value)?;
    }
    backward_section(&spec.trunk, "trunk", params, &trace.trunk, grad_trunk_out, 0, grads)?;
    Ok(())
}

fn backward_section<T: Scalar>(
    layers: &[LayerSpec],
    section: &str,
    params: &ParamStore<T>,
    trace: &SectionTrace<T>,
    grad_out: Tensor<T>,
    skip_last: usize,
    grads: &mut GradStore<T>,
) -> Result<Tensor<T>, NnError> {
    let mut g = grad_out;
    for idx in (0..layers.len() - skip_last).rev() {
        g = layer_backward(&layers[idx], section, idx, params, &trace.inputs[idx], &trace.masks[idx], g, grads)?;
    }
    Ok(g)
}

#[allow(clippy::too_many_arguments)]
fn layer_backward<T: Scalar>(
    layer: &LayerSpec,
    section: &str,
    idx: usize,
    params: &ParamStore<T>,
    x: &Tensor<T>,
    mask: &Option<Vec<bool>>,
    g: Tensor<T>,
    grads: &mut GradStore<T>,
) -> Result<Tensor<T>, NnError> {
    match layer {
        LayerSpec::Dense { inputs, outputs } => {
            let (wn, bn) = layer.param_names(section, idx).expect("dense has params");
            let w = params.get(&wn)?;
            let mut gx = Tensor::zeros(&[*inputs]);
            {
                let dw = grads.get_mut(&wn)?;
                for o in 0..*outputs {
                    let go = g.data()[o];
                    let row = &mut dw.data_mut()[o * inputs..(o + 1) * inputs];
                    for (i, dwi) in row.iter_mut().enumerate() {
                        *dwi += go * x.data()[i];
                    }
                }
            }
            {
                let db = grads.get_mut(&bn)?;
                for o in 0..*outputs {
                    db.data_mut()[o] += g.data()[o];
                }
            }
            for o in 0..*outputs {
                let go = g.data()[o];
                let row = &w.data()[o * inputs..(o + 1) * inputs];
                for (i, wi) in row.iter().enumerate() {
                    gx.data_mut()[i] += *wi * go;
                }
            }
            Ok(gx)
        }
        LayerSpec::Conv2d { in_channels, out_channels, kernel } => {
            let (wn, bn) = layer.param_names(section, idx).expect("conv has params");
            let w = params.get(&wn)?;
            let (h, wd) = (x.shape()[1], x.shape()[2]);
            let pad = (kernel - 1) / 2;
            let k = *kernel;
            let mut gx = Tensor::zeros(x.shape());
            let dw = grads.get_mut(&wn)?;
            for oc in 0..*out_channels {
                for r in 0..h {
                    for c in 0..wd {
                        let go = g.data()[(oc * h + r) * wd + c];
                        for ic in 0..*in_channels {
                            for kr in 0..k {
                                let rr = r + kr;
                                if rr < pad || rr - pad >= h {
                                    continue;
                                }
                                let rr = rr - pad;
                                for kc in 0..k {
                                    let cc = c + kc;
                                    if cc < pad || cc - pad >= wd {
                                        continue;
                                    }
                                    let cc = cc - pad;
                                    let widx = ((oc * in_channels + ic) * k + kr) * k + kc;
                                    let xidx = (ic * h + rr) * wd + cc;
                                    dw.data_mut()[widx] += go * x.data()[xidx];
                                    gx.data_mut()[xidx] += w.data()[widx] * go;
                                }
                            }
                        }
                    }
                }
            }
            let db = grads.get_mut(&bn)?;
            for oc in 0..*out_channels {
                for r in 0..h {
                    for c in 0..wd {
                        db.data_mut()[oc] += g.data()[(oc * h + r) * wd + c];
                    }
                }
            }
            Ok(gx)
        }
        LayerSpec::Relu => {
            let mut gx = g;
            for (gv, xv) in gx.data_mut().iter_mut().zip(x.data()) {
                if *xv <= T::zero() {
                    *gv = T::zero();
                }
            }
            Ok(gx)
        }
        LayerSpec::Softmax => {
            let y = softmax(x);
            let dot = y
                .data()
                .iter()
                .zip(g.data())
                .fold(T::zero(), |acc, (yi, gi)| acc + *yi * *gi);
            let mut gx = g;
            for (gv, yv) in gx.data_mut().iter_mut().zip(y.data()) {
                *gv = *yv * (*gv - dot);
            }
            Ok(gx)
        }
        LayerSpec::Tanh => {
            let mut gx = g;
            for (gv, xv) in gx.data_mut().iter_mut().zip(x.data()) {
                let y = xv.tanh();
                *gv = *gv * (T::one() - y * y);
            }
            Ok(gx)
        }
        LayerSpec::Dropout { rate } => {
            let mut gx = g;
            match mask {
                None => {}
                Some(mask) => {
                    let scale = T::lit(1.0 / (1.0 - rate));
                    for (gv, keep) in gx.data_mut().iter_mut().zip(mask) {
                        *gv = if *keep { *gv * scale } else { T::zero() };
                    }
                }
            }
            Ok(gx)
        }
        LayerSpec::Flatten => gx_reshape(g, x.shape()),
    }
}

fn gx_reshape<T: Scalar>(g: Tensor<T>, shape: &[usize]) -> Result<Tensor<T>, NnError> {
    g.reshaped(shape)
}
