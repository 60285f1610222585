use serde::{Deserialize, Serialize};

use crate::NnError;

/// One layer of a network. Convolutions use stride 1 and same padding
/// (`pad = (kernel - 1) / 2`), so spatial dimensions are preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Dense { inputs: usize, outputs: usize },
    Conv2d { in_channels: usize, out_channels: usize, kernel: usize },
    Relu,
    Softmax,
    Tanh,
    Dropout { rate: f64 },
    Flatten,
}

impl LayerSpec {
    /// Output shape given an input shape, or an error when they don't compose.
    pub fn out_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        match self {
            LayerSpec::Dense { inputs, outputs } => {
                if input != [*inputs] {
                    return Err(NnError::ShapeMismatch {
                        context: "dense layer input".into(),
                        expected: vec![*inputs],
                        got: input.to_vec(),
                    });
                }
                Ok(vec![*outputs])
            }
            LayerSpec::Conv2d { in_channels, kernel, out_channels } => {
                if input.len() != 3 || input[0] != *in_channels {
                    return Err(NnError::ShapeMismatch {
                        context: "conv2d layer input".into(),
                        expected: vec![*in_channels, 0, 0],
                        got: input.to_vec(),
                    });
                }
                if *kernel == 0 || kernel % 2 == 0 {
                    return Err(NnError::InvalidSpec(format!(
                        "conv2d kernel must be odd and positive, got {kernel}"
                    )));
                }
                Ok(vec![*out_channels, input[1], input[2]])
            }
            LayerSpec::Relu | LayerSpec::Softmax | LayerSpec::Tanh => Ok(input.to_vec()),
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return Err(NnError::InvalidSpec(format!(
                        "dropout rate must be in [0, 1), got {rate}"
                    )));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. })
    }
}

/// Network topology: a shared trunk feeding a policy head and an optional
/// scalar value head.
///
/// Probability-emitting policy heads end in [`LayerSpec::Softmax`]; Q-value
/// heads omit it and emit raw action values. Value heads end in
/// [`LayerSpec::Tanh`] and output a single unit in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub trunk: Vec<LayerSpec>,
    pub policy_head: Vec<LayerSpec>,
    pub value_head: Option<Vec<LayerSpec>>,
}

impl NetworkSpec {
    pub fn new(
        input_shape: Vec<usize>,
        trunk: Vec<LayerSpec>,
        policy_head: Vec<LayerSpec>,
        value_head: Option<Vec<LayerSpec>>,
    ) -> Result<Self, NnError> {
        let spec = NetworkSpec { input_shape, trunk, policy_head, value_head };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_shape.is_empty() || self.input_shape.iter().any(|&d| d == 0) {
            return Err(NnError::InvalidSpec("empty or zero input shape".into()));
        }
        let trunk_out = shape_through(&self.trunk, &self.input_shape)?;
        let policy_out = shape_through(&self.policy_head, &trunk_out)?;
        if policy_out.len() != 1 {
            return Err(NnError::InvalidSpec(format!(
                "policy head must output a flat vector, got {policy_out:?}"
            )));
        }
        if let Some(value_head) = &self.value_head {
            let value_out = shape_through(value_head, &trunk_out)?;
            if value_out != [1] {
                return Err(NnError::InvalidSpec(format!(
                    "value head must output a single unit, got {value_out:?}"
                )));
            }
            if value_head.last() != Some(&LayerSpec::Tanh) {
                return Err(NnError::InvalidSpec("value head must end in tanh".into()));
            }
        }
        Ok(())
    }

    pub fn trunk_out_shape(&self) -> Vec<usize> {
        shape_through(&self.trunk, &self.input_shape).expect("validated spec")
    }

    pub fn policy_len(&self) -> usize {
        let trunk_out = self.trunk_out_shape();
        shape_through(&self.policy_head, &trunk_out).expect("validated spec")[0]
    }

    pub fn has_value_head(&self) -> bool {
        self.value_head.is_some()
    }

    /// True when the policy head emits a softmax distribution (as opposed to
    /// raw Q values).
    pub fn policy_is_distribution(&self) -> bool {
        self.policy_head.last() == Some(&LayerSpec::Softmax)
    }

    /// Names and shapes of every parameter tensor, in `(name, shape)` pairs.
    /// Names are `{section}.{layer_index}.{w|b}`.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut walk = |section: &str, layers: &[LayerSpec], mut shape: Vec<usize>| {
            for (idx, layer) in layers.iter().enumerate() {
                match layer {
                    LayerSpec::Dense { inputs, outputs } => {
                        out.push((format!("{section}.{idx}.w"), vec![*outputs, *inputs]));
                        out.push((format!("{section}.{idx}.b"), vec![*outputs]));
                    }
                    LayerSpec::Conv2d { in_channels, out_channels, kernel } => {
                        out.push((
                            format!("{section}.{idx}.w"),
                            vec![*out_channels, *in_channels, *kernel, *kernel],
                        ));
                        out.push((format!("{section}.{idx}.b"), vec![*out_channels]));
                    }
                    _ => {}
                }
                shape = layer.out_shape(&shape).expect("validated spec");
            }
        };
        walk("trunk", &self.trunk, self.input_shape.clone());
        let trunk_out = self.trunk_out_shape();
        walk("policy", &self.policy_head, trunk_out.clone());
        if let Some(value_head) = &self.value_head {
            walk("value", value_head, trunk_out);
        }
        out
    }
}

pub(crate) fn shape_through(layers: &[LayerSpec], input: &[usize]) -> Result<Vec<usize>, NnError> {
    let mut shape = input.to_vec();
    for layer in layers {
        shape = layer.out_shape(&shape)?;
    }
    Ok(shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_pv_spec() -> NetworkSpec {
        NetworkSpec::new(
            vec![2, 4, 4],
            vec![
                LayerSpec::Conv2d { in_channels: 2, out_channels: 3, kernel: 3 },
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: 48, outputs: 8 },
                LayerSpec::Relu,
            ],
            vec![LayerSpec::Dense { inputs: 8, outputs: 5 }, LayerSpec::Softmax],
            Some(vec![LayerSpec::Dense { inputs: 8, outputs: 1 }, LayerSpec::Tanh]),
        )
        .unwrap()
    }

    #[test]
    fn shapes_compose() {
        let spec = small_pv_spec();
        assert_eq!(spec.trunk_out_shape(), vec![8]);
        assert_eq!(spec.policy_len(), 5);
        assert!(spec.policy_is_distribution());
    }

    #[test]
    fn rejects_mismatched_dense() {
        let err = NetworkSpec::new(
            vec![4],
            vec![LayerSpec::Dense { inputs: 3, outputs: 2 }],
            vec![LayerSpec::Softmax],
            None,
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_value_head_without_tanh() {
        let err = NetworkSpec::new(
            vec![4],
            vec![],
            vec![LayerSpec::Dense { inputs: 4, outputs: 2 }, LayerSpec::Softmax],
            Some(vec![LayerSpec::Dense { inputs: 4, outputs: 1 }]),
        );
        assert!(err.is_err());
    }

    #[test]
    fn param_names_are_stable() {
        let spec = small_pv_spec();
        let names: Vec<String> = spec.param_shapes().into_iter().map(|(n, _)| n).collect();
        assert_eq!(
            names,
            vec![
                "trunk.0.w", "trunk.0.b", "trunk.3.w", "trunk.3.b", "policy.0.w", "policy.0.b",
                "value.0.w", "value.0.b",
            ]
        );
    }
}
