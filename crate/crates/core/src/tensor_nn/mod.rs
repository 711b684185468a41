//! A small deterministic neural-network engine: dense tensors, layers with
//! explicit forward/backward passes, losses, optimizers, and a
//! finite-difference gradient oracle.

pub mod gradcheck;
mod kernels;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod tensor;

pub use gradcheck::{finite_difference_gradient, run_gradient_suite, GradCheckRow};
pub use layers::{
    conv2d_backward, conv2d_forward, fc_backward, fc_forward, grl_backward, grl_forward, maxpool2d_backward,
    maxpool2d_forward, relu_backward, relu_forward, softmax_rows, Conv2d, Dense, GradientReversal, Layer,
    LayerKind, MaxPool2d,
};
pub use loss::softmax_cross_entropy;
pub use optim::{adam_step, sgd_momentum_step, OptimizerKind, OptimizerState};
pub use tensor::{Scalar, Tensor};
