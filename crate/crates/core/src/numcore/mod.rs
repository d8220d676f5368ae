//! Dense tensor numerics: direct convolution, ReLU, momentum SGD and a
//! finite-difference gradient checker.
//!
//! Everything here is a pure function over its inputs and runs in 64-bit
//! floating point.

mod activation;
mod conv;
mod gradcheck;
mod sgd;
mod tensor;

pub(crate) use activation::relu_mask_inplace;
pub use activation::{relu_backward, relu_forward, relu_forward_inplace};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvParams};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, DEFAULT_EPS, REL_FLOOR};
pub use sgd::{
    sgd_step, OptimizerState, SgdConfig, DEFAULT_CLIP, DEFAULT_MOMENTUM, DEFAULT_WEIGHT_DECAY,
};
pub use tensor::Tensor;
