use crate::control::{attitude_p, rate_pid, reset_integrators, ControlCommand, ControlGains, RatePidState};
use crate::estimator::Estimate;
use crate::simcore::{DroneState, PhysicalParams, GRAVITY};

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
}

/// Attitude P and rate PID for roll/pitch fed by an estimate, yaw held on
/// ground truth, thrust tilt-compensated with the estimated attitude.
#[derive(Debug, Clone)]
pub struct Cascade {
    pub gains: ControlGains,
    pub params: PhysicalParams,
    pids: [RatePidState; 3],
    pub last_rate_setpoint: [f64; 3],
}

impl Cascade {
    pub fn new(gains: ControlGains, params: PhysicalParams) -> Self {
        Self { gains, params, pids: [RatePidState::default(); 3], last_rate_setpoint: [0.0; 3] }
    }

    pub fn reset_integrators(&mut self) {
        reset_integrators(&mut self.pids);
    }

    pub fn pid_states(&self) -> &[RatePidState; 3] {
        &self.pids
    }

    #[allow(clippy::too_many_arguments)]
    pub fn command(
        &mut self,
        attitude_sp: [f64; 2],
        yaw_sp: f64,
        est: &Estimate,
        truth: &DroneState,
        climb_accel: f64,
        dt: f64,
    ) -> ControlCommand {
        let g = &self.gains;
        let rates = attitude_p(attitude_sp, [est.roll, est.pitch], g.attitude_p, g.rate_limit);
        let yaw_rate_sp = (g.yaw_p * wrap_angle(yaw_sp - truth.yaw)).clamp(-g.rate_limit, g.rate_limit);
        let tx = rate_pid(rates[0], est.p, dt, g, &mut self.pids[0]);
        let ty = rate_pid(rates[1], est.q, dt, g, &mut self.pids[1]);
        let tz = g.yaw_rate_p * (yaw_rate_sp - truth.r);
        self.last_rate_setpoint = [rates[0], rates[1], yaw_rate_sp];

        let tilt = (est.roll.cos() * est.pitch.cos()).max(0.7);
        let m = self.params.mass;
        let thrust = (m * (GRAVITY + climb_accel.clamp(-0.8 * GRAVITY, 2.0 * GRAVITY)) / tilt)
            .min(4.0 * self.params.max_motor_thrust());
        ControlCommand { thrust, torque: [tx, ty, tz] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_hover_commands_weight() {
        let mut c = Cascade::new(ControlGains::default(), PhysicalParams::default());
        let s = DroneState::at_height(1.0);
        let cmd = c.command([0.0; 2], 0.0, &Estimate::from_state(&s, 0), &s, 0.0, 0.005);
        assert!((cmd.thrust - 0.8 * GRAVITY).abs() < 1e-12);
        assert_eq!(cmd.torque, [0.0; 3]);
    }

    #[test]
    fn wraps_yaw_error() {
        assert!((wrap_angle(3.5) - (3.5 - std::f64::consts::TAU)).abs() < 1e-12);
        assert!((wrap_angle(-0.2) + 0.2).abs() < 1e-15);
    }
}
