use crate::error::{Error, Result};
use crate::kv::KeyValues;

#[derive(Debug, Clone, PartialEq)]
pub struct PositionGains {
    /// Position error to velocity setpoint, 1/s.
    pub position_p: f64,
    /// Velocity error to acceleration setpoint, 1/s.
    pub velocity_p: f64,
    pub max_speed: f64,
    /// Attitude setpoint limit, rad.
    pub max_tilt: f64,
    pub altitude_p: f64,
    pub altitude_d: f64,
}

impl Default for PositionGains {
    fn default() -> Self {
        Self {
            position_p: 1.0,
            velocity_p: 2.0,
            max_speed: 2.0,
            max_tilt: 15f64.to_radians(),
            altitude_p: 4.0,
            altitude_d: 3.0,
        }
    }
}

/// Gains of the two-layer attitude controller. Roll and pitch share values;
/// the yaw loop always runs on ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGains {
    /// Attitude error to rate setpoint, (rad/s)/rad.
    pub attitude_p: f64,
    /// Rate PID, torque in N·m per rad/s of error.
    pub rate_kp: f64,
    pub rate_ki: f64,
    pub rate_kd: f64,
    /// Low-pass time constant of the derivative-on-measurement path, s.
    pub derivative_tau: f64,
    /// Integrator contribution limit, N·m.
    pub integrator_clamp: f64,
    pub rate_limit: f64,
    pub yaw_p: f64,
    pub yaw_rate_p: f64,
    pub position: PositionGains,
}

impl Default for ControlGains {
    fn default() -> Self {
        Self {
            attitude_p: 6.0,
            rate_kp: 0.10,
            rate_ki: 0.30,
            rate_kd: 0.002,
            derivative_tau: 0.020,
            integrator_clamp: 0.05,
            rate_limit: 200f64.to_radians(),
            yaw_p: 3.0,
            yaw_rate_p: 0.05,
            position: PositionGains::default(),
        }
    }
}

impl ControlGains {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.attitude_p,
            self.rate_kp,
            self.rate_ki,
            self.rate_kd,
            self.derivative_tau,
            self.integrator_clamp,
            self.rate_limit,
            self.yaw_p,
            self.yaw_rate_p,
            self.position.position_p,
            self.position.velocity_p,
            self.position.max_speed,
            self.position.max_tilt,
            self.position.altitude_p,
            self.position.altitude_d,
        ];
        if all.iter().any(|g| !g.is_finite()) {
            return Err(Error::Config("control gains must be finite".into()));
        }
        if self.integrator_clamp <= 0.0 || self.rate_limit <= 0.0 || self.derivative_tau <= 0.0 {
            return Err(Error::Config("clamps and filter constants must be positive".into()));
        }
        Ok(())
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let dp = &d.position;
        let g = Self {
            attitude_p: kv.parse_or("attitude_p", d.attitude_p)?,
            rate_kp: kv.parse_or("rate_kp", d.rate_kp)?,
            rate_ki: kv.parse_or("rate_ki", d.rate_ki)?,
            rate_kd: kv.parse_or("rate_kd", d.rate_kd)?,
            derivative_tau: kv.parse_or("derivative_tau", d.derivative_tau)?,
            integrator_clamp: kv.parse_or("integrator_clamp", d.integrator_clamp)?,
            rate_limit: kv.parse_or::<f64>("rate_limit_deg", d.rate_limit.to_degrees())?.to_radians(),
            yaw_p: kv.parse_or("yaw_p", d.yaw_p)?,
            yaw_rate_p: kv.parse_or("yaw_rate_p", d.yaw_rate_p)?,
            position: PositionGains {
                position_p: kv.parse_or("position_p", dp.position_p)?,
                velocity_p: kv.parse_or("velocity_p", dp.velocity_p)?,
                max_speed: kv.parse_or("max_speed", dp.max_speed)?,
                max_tilt: kv.parse_or::<f64>("max_tilt_deg", dp.max_tilt.to_degrees())?.to_radians(),
                altitude_p: kv.parse_or("altitude_p", dp.altitude_p)?,
                altitude_d: kv.parse_or("altitude_d", dp.altitude_d)?,
            },
        };
        g.validate()?;
        Ok(g)
    }
}
