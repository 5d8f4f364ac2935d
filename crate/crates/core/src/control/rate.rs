use crate::control::ControlGains;

/// Per-axis state of the rate PID.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RatePidState {
    pub integrator: f64,
    pub filtered_derivative: f64,
    pub last_measurement: Option<f64>,
}

/// Rate PID with integrator clamp and low-passed derivative on measurement.
/// Returns the torque for one axis.
pub fn rate_pid(setpoint: f64, measurement: f64, dt: f64, gains: &ControlGains, state: &mut RatePidState) -> f64 {
    let error = setpoint - measurement;
    let clamp = gains.integrator_clamp;
    state.integrator = (state.integrator + gains.rate_ki * error * dt).clamp(-clamp, clamp);

    let raw = match state.last_measurement {
        Some(prev) => (measurement - prev) / dt,
        None => 0.0,
    };
    state.last_measurement = Some(measurement);
    let alpha = dt / (gains.derivative_tau + dt);
    state.filtered_derivative += alpha * (raw - state.filtered_derivative);

    gains.rate_kp * error + state.integrator - gains.rate_kd * state.filtered_derivative
}

/// Zeroes the integral terms; derivative filters keep their history.
pub fn reset_integrators(states: &mut [RatePidState]) {
    for s in states {
        s.integrator = 0.0;
    }
}
