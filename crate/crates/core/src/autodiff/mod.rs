//! Small reverse-mode differentiation engine with exactly the layers the
//! estimator networks need.

mod adam;
mod checkpoint;
mod gradcheck;
mod layers;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use checkpoint::{Checkpoint, NamedTensor, OptimizerSection};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use layers::{Conv2dLayer, ConvGru, FcGru, LifLayer, LinearLayer};
pub use params::{Gradients, ParamId, ParamSet};
pub use tape::{elu, heaviside, sigmoid, surrogate_derivative, NodeGrads, Tape, Var};
pub use tensor::Tensor;
