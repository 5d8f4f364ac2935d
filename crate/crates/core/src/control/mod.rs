//! Cascaded flight control: attitude P → rate PID → mixer, an outer
//! position/altitude hold, and the closed-loop flight harness.

mod attitude;
mod cascade;
mod gains;
mod harness;
mod log;
mod mixer;
mod position;
mod rate;

pub use attitude::attitude_p;
pub use cascade::Cascade;
pub use gains::{ControlGains, PositionGains};
pub use harness::{
    closed_loop_run, replay_commands, EstimateSource, FlightOptions, FlightSummary, SourceMode, CONTROL_DT,
};
pub use log::{FlightLog, FlightRow};
pub use mixer::{allocation_matrix, mix, ControlCommand, MixResult};
pub use position::{position_hold, OuterCommand};
pub use rate::{rate_pid, reset_integrators, RatePidState};
