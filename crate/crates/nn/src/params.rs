use std::collections::BTreeMap;

use rand::Rng;

use crate::spec::NetworkSpec;
use crate::tensor::{Scalar, Tensor};
use crate::{LayerSpec, NnError};

/// Named weight tensors plus optimizer state. Iteration order is the sorted
/// name order, which keeps checkpoints and optimizer sweeps deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    tensors: BTreeMap<String, Tensor<T>>,
    /// Number of optimizer steps applied so far.
    pub step: u64,
    pub(crate) adam: Option<AdamState<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct AdamState<T> {
    pub m: BTreeMap<String, Tensor<T>>,
    pub v: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn from_tensors(tensors: BTreeMap<String, Tensor<T>>) -> Self {
        ParamStore { tensors, step: 0, adam: None }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>, NnError> {
        self.tensors.get(name).ok_or_else(|| NnError::MissingParam(name.into()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>, NnError> {
        self.tensors.get_mut(name).ok_or_else(|| NnError::MissingParam(name.into()))
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor<T>> {
        &self.tensors
    }

    /// Copies weight tensors from `other`, leaving optimizer state untouched.
    /// This is the target-network refresh primitive.
    pub fn copy_weights_from(&mut self, other: &ParamStore<T>) {
        self.tensors = other.tensors.clone();
    }

    /// Deterministic checksum of the weights, used by concurrency tests to
    /// detect torn reads.
    pub fn weight_checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for (name, tensor) in &self.tensors {
            for byte in name.as_bytes() {
                h = (h ^ u64::from(*byte)).wrapping_mul(0x100000001b3);
            }
            for v in tensor.data() {
                let bits = v.to_f64().map(f64::to_bits).unwrap_or(0);
                h = (h ^ bits).wrapping_mul(0x100000001b3);
            }
        }
        h
    }
}

/// Gradient tensors shaped like a [`ParamStore`]'s weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GradStore<T> {
    tensors: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> GradStore<T> {
    /// Zero gradients shaped like `params`.
    pub fn zeros_like(params: &ParamStore<T>) -> Self {
        GradStore {
            tensors: params
                .tensors
                .iter()
                .map(|(name, t)| (name.clone(), Tensor::zeros(t.shape())))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>, NnError> {
        self.tensors.get(name).ok_or_else(|| NnError::MissingParam(name.into()))
    }

    pub(crate) fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>, NnError> {
        self.tensors.get_mut(name).ok_or_else(|| NnError::MissingParam(name.into()))
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor<T>> {
        &self.tensors
    }

    /// `self += other`, used to accumulate per-transition gradients.
    pub fn accumulate(&mut self, other: &GradStore<T>) -> Result<(), NnError> {
        for (name, tensor) in &other.tensors {
            self.tensors
                .get_mut(name)
                .ok_or_else(|| NnError::MissingParam(name.clone()))?
                .add_assign(tensor)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for tensor in self.tensors.values_mut() {
            tensor.scale(factor);
        }
    }

    pub fn set_zero(&mut self) {
        for tensor in self.tensors.values_mut() {
            tensor.fill(T::zero());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(Tensor::is_finite)
    }

    /// Largest absolute entry, handy for tests and debugging.
    pub fn max_abs(&self) -> T {
        let mut best = T::zero();
        for tensor in self.tensors.values() {
            for v in tensor.data() {
                if v.abs() > best {
                    best = v.abs();
                }
            }
        }
        best
    }
}

/// Glorot-uniform weight initialization: `U(-a, a)` with
/// `a = sqrt(6 / (fan_in + fan_out))`. Biases start at zero.
pub fn init_params<T: Scalar>(spec: &NetworkSpec, rng: &mut impl Rng) -> ParamStore<T> {
    let mut tensors = BTreeMap::new();
    // param_shapes returns section order; sample in that order so seeds are
    // reproducible regardless of the BTreeMap's sorted storage.
    for (name, shape) in spec.param_shapes() {
        let tensor = if name.ends_with(".w") {
            let (fan_in, fan_out) = fans(&name, &shape, spec);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut t = Tensor::zeros(&shape);
            for v in t.data_mut() {
                *v = T::lit(rng.gen_range(-bound..bound));
            }
            t
        } else {
            Tensor::zeros(&shape)
        };
        tensors.insert(name, tensor);
    }
    ParamStore::from_tensors(tensors)
}

fn fans(name: &str, shape: &[usize], spec: &NetworkSpec) -> (usize, usize) {
    // Dense weights are [out, in]; conv weights are [oc, ic, k, k].
    let _ = (name, spec);
    match shape.len() {
        2 => (shape[1], shape[0]),
        4 => (shape[1] * shape[2] * shape[3], shape[0] * shape[2] * shape[3]),
        _ => (shape.iter().product(), shape.iter().product()),
    }
}

/// Zero-initialized parameters, used by tests and baseline oracles.
pub fn zero_params<T: Scalar>(spec: &NetworkSpec) -> ParamStore<T> {
    ParamStore::from_tensors(
        spec.param_shapes()
            .into_iter()
            .map(|(name, shape)| (name, Tensor::zeros(&shape)))
            .collect(),
    )
}

impl LayerSpec {
    pub(crate) fn param_names(&self, section: &str, idx: usize) -> Option<(String, String)> {
        if self.has_params() {
            Some((format!("{section}.{idx}.w"), format!("{section}.{idx}.b")))
        } else {
            None
        }
    }
}
