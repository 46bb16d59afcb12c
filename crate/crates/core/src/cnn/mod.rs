//! LeNet-style convolution / pooling stack with tanh activations.
//!
//! Convolutions are valid cross-correlations (no kernel flip, no padding,
//! stride 1) with full connectivity between consecutive map banks. Pooling
//! sums each non-overlapping window, then applies a trainable per-map
//! scale and bias before the tanh.
//!
//! A model carries a temporary softmax head while it is being pretrained;
//! [`CnnModel::freeze`] drops the head and turns the stack into a
//! read-only feature extractor.

mod arch;
mod layers;
mod model;

pub use arch::{CnnArchitecture, Stage, DEFAULT_INPUT_SIZE, KERNEL_SIZE};
pub use layers::{conv_forward, pool_forward, ConvLayer, Layer, PoolLayer};
pub use model::{CnnModel, DenseHead, ParamClass, PretrainConfig};
