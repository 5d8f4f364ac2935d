//! Quadrotor rigid-body simulation and the reduced planar motion models.
//!
//! Frames: world axes are north/east with `z` reported as height above
//! ground; the body frame is forward-right-down (FRD). With this convention a
//! positive roll (right side down) accelerates the vehicle toward body `+y`,
//! which is the sign used by the planar model `υ̇_y = g·tan φ`.

mod dynamics;
mod params;
mod planar;
mod scenario;
mod trajectory;

pub use dynamics::{
    body_wrench, euler_to_rotation, mechanical_energy, step_full_dynamics, world_velocity, DroneState,
    MotorLag, MotorSpeeds, Quadrotor, Wrench,
};
pub use params::{MotorGeometry, PhysicalParams, GRAVITY};
pub use planar::{
    extended_derivative, planar_derivative, step_extended_model, step_planar_model, ventral_flow, ExtendedState,
    PlanarState,
};
pub use scenario::{Scenario, Setpoint};
pub use trajectory::{generate_excitation_trajectory, Trajectory, TrajectorySample, PHYSICS_DT};
