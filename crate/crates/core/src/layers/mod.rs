//! Shallow-CNN building blocks with explicit forward and backward passes.

pub mod activation;
pub mod conv;
pub mod loss;
pub mod optim;
pub mod pool;
pub mod upsample;

pub use activation::{relu_backward_in_place, relu_in_place, sigmoid};
pub use conv::{
    conv2d_backward, conv2d_forward, deconv2d_backward, deconv2d_forward, ConvGrads, ConvSpec,
};
pub use loss::{sigmoid_bce, softmax_ce, LossMask};
pub use optim::{sgd_step, OptimState, SgdConfig};
pub use pool::{maxpool2d, maxpool2d_backward, PoolIndices};
pub use upsample::{bilinear_upsample, bilinear_upsample_backward};
