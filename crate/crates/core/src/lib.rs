//! Attitude estimation and control for quadrotors from event-camera data
//! alone, together with the simulator, training pipeline, filter baseline and
//! evaluation tools needed to study it.

pub mod autodiff;
pub mod control;
pub mod error;
pub mod estimator;
pub mod ekf;
pub mod eventcam;
pub mod kv;
pub mod metrics;
pub mod scalar;
pub mod simcore;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Single-precision tensor, the training default.
pub type Tensor32 = autodiff::Tensor<f32>;
/// Double-precision tensor, used by gradient checks.
pub type Tensor64 = autodiff::Tensor<f64>;
pub type Network32 = estimator::EstimatorNetwork<f32>;
pub type Network64 = estimator::EstimatorNetwork<f64>;
