//! A small trainable residual network written from scratch.
//!
//! Activations are `[channels, height, width]` tensors of `f64`. Blocks
//! follow the post-addition rectifier layout: two 3x3 convolutions in the
//! body, an identity or 1x1 projection shortcut, and `relu` after the sum.
//! There is no batch normalization.

mod block;
pub mod checkpoint;
mod conv;
mod loss;
mod model;
mod optim;
mod tensor;
mod train;

pub use block::{BlockCache, ResidualBlock, Shortcut};
pub use checkpoint::Checkpoint;
pub use conv::ConvLayer;
pub use loss::softmax_xent;
pub use model::{ArchConfig, BlockSpec, ForwardCache, TinyResNet, RESIDUAL_INIT_SCALE};
pub use optim::{lr_at, sgd_step, SGDConfig};
pub use tensor::Tensor;
pub use train::{accuracy, example_tensor, predict, train, BestModel, Example, TrainConfig, TrainOutcome};
