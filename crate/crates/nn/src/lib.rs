//! Minimal neural network stack for self-play training.
//!
//! Dense and convolutional layers with manual backpropagation, SGD and Adam
//! optimizers, and the three loss functions used by the self-play algorithms
//! (cross-entropy, single-action squared TD error, combined policy+value).
//!
//! Everything is generic over the float type: production code runs on `f32`
//! (the checkpoint format stores 32-bit floats), while gradient-check tests
//! instantiate the same code at `f64` so central finite differences are
//! meaningful.

mod checkpoint;
mod error;
mod forward;
pub mod gradcheck;
mod loss;
mod optim;
mod params;
mod spec;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use error::NnError;
pub use forward::{forward, softmax, ForwardOutput, Mode};
pub use loss::{loss_and_gradients, CrossEntropyBatch, LossBatch, LossKind, PolicyValueBatch, QBatch};
pub use optim::{apply_gradients, OptimizerCfg};
pub use params::{init_params, zero_params, GradStore, ParamStore};
pub use spec::{LayerSpec, NetworkSpec};
pub use tensor::{Scalar, Tensor};
