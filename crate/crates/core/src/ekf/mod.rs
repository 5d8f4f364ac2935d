//! Model-based baseline: an extended Kalman filter on the planar motion
//! model with ventral optical-flow measurements, and a numerical local
//! observability analysis of the same system.

mod filter;
mod observability;
mod run;

pub use filter::{
    ekf_predict, ekf_update, measurement_jacobian, model_derivative, predict_flow, state_jacobian, EkfConfig,
    FilterMode, FilterState, Innovation,
};
pub use observability::{observability_matrix, Observability};
pub use run::{run_filter, simulate_model, FilterLog, FilterRow, ModelTrajectory};
