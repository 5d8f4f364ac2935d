use crate::error::{Error, Result};
use crate::kv::KeyValues;

/// Standard gravity; fixed, not configurable.
pub const GRAVITY: f64 = 9.81;

/// Physical constants of the simulated airframe.
///
/// Defaults describe a generic 5-inch racing-class quadrotor of about 0.8 kg.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    pub mass: f64,
    pub inertia_xx: f64,
    pub inertia_yy: f64,
    pub inertia_zz: f64,
    /// Distance from the center of mass to each rotor axis.
    pub arm_length: f64,
    /// Rotor thrust per squared rotor speed, N/(rad/s)².
    pub thrust_coeff: f64,
    /// Rotor drag torque per squared rotor speed, N·m/(rad/s)².
    pub torque_coeff: f64,
    pub max_motor_speed: f64,
    /// First-order motor lag time constant, s.
    pub motor_time_constant: f64,
    /// Linear body-frame drag, N per m/s, per body axis.
    pub linear_drag: [f64; 3],
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            mass: 0.8,
            inertia_xx: 0.0035,
            inertia_yy: 0.0035,
            inertia_zz: 0.0060,
            arm_length: 0.11,
            thrust_coeff: 1.0e-6,
            torque_coeff: 1.6e-8,
            max_motor_speed: 2800.0,
            motor_time_constant: 0.030,
            linear_drag: [0.10, 0.10, 0.20],
        }
    }
}

/// Quad-X rotor layout in the body frame: motor 1 front-right, 2 rear-left,
/// 3 front-left, 4 rear-right. Motors 1 and 2 spin counter-clockwise seen
/// from above, which pushes the body with a `+z` (FRD) reaction torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorGeometry {
    pub positions: [[f64; 2]; 4],
    pub spin: [f64; 4],
}

impl PhysicalParams {
    pub fn gravity(&self) -> f64 {
        GRAVITY
    }

    pub fn inertia(&self) -> [f64; 3] {
        [self.inertia_xx, self.inertia_yy, self.inertia_zz]
    }

    pub fn geometry(&self) -> MotorGeometry {
        let d = self.arm_length / std::f64::consts::SQRT_2;
        MotorGeometry {
            positions: [[d, d], [-d, -d], [d, -d], [-d, d]],
            spin: [1.0, 1.0, -1.0, -1.0],
        }
    }

    /// Rotor speed at which the four rotors together carry the weight.
    pub fn hover_motor_speed(&self) -> f64 {
        (self.mass * GRAVITY / (4.0 * self.thrust_coeff)).sqrt()
    }

    pub fn max_motor_thrust(&self) -> f64 {
        self.thrust_coeff * self.max_motor_speed * self.max_motor_speed
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("inertia_xx", self.inertia_xx),
            ("inertia_yy", self.inertia_yy),
            ("inertia_zz", self.inertia_zz),
            ("arm_length", self.arm_length),
            ("thrust_coeff", self.thrust_coeff),
            ("torque_coeff", self.torque_coeff),
            ("max_motor_speed", self.max_motor_speed),
            ("motor_time_constant", self.motor_time_constant),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.linear_drag.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Config("linear_drag must be non-negative".into()));
        }
        if self.max_motor_thrust() * 4.0 <= self.mass * GRAVITY {
            return Err(Error::Config("rotors cannot lift the airframe".into()));
        }
        Ok(())
    }

    /// Reads overrides from `kv`; missing keys keep the defaults.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let drag = match kv.list::<f64>("linear_drag")? {
            None => d.linear_drag,
            Some(v) if v.len() == 3 => [v[0], v[1], v[2]],
            Some(_) => return Err(Error::Config("linear_drag needs three values".into())),
        };
        let p = Self {
            mass: kv.parse_or("mass", d.mass)?,
            inertia_xx: kv.parse_or("inertia_xx", d.inertia_xx)?,
            inertia_yy: kv.parse_or("inertia_yy", d.inertia_yy)?,
            inertia_zz: kv.parse_or("inertia_zz", d.inertia_zz)?,
            arm_length: kv.parse_or("arm_length", d.arm_length)?,
            thrust_coeff: kv.parse_or("thrust_coeff", d.thrust_coeff)?,
            torque_coeff: kv.parse_or("torque_coeff", d.torque_coeff)?,
            max_motor_speed: kv.parse_or("max_motor_speed", d.max_motor_speed)?,
            motor_time_constant: kv.parse_or("motor_time_constant", d.motor_time_constant)?,
            linear_drag: drag,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        kv.set("mass", self.mass);
        kv.set("inertia_xx", self.inertia_xx);
        kv.set("inertia_yy", self.inertia_yy);
        kv.set("inertia_zz", self.inertia_zz);
        kv.set("arm_length", self.arm_length);
        kv.set("thrust_coeff", self.thrust_coeff);
        kv.set("torque_coeff", self.torque_coeff);
        kv.set("max_motor_speed", self.max_motor_speed);
        kv.set("motor_time_constant", self.motor_time_constant);
        kv.set(
            "linear_drag",
            format!("{}, {}, {}", self.linear_drag[0], self.linear_drag[1], self.linear_drag[2]),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_hover_below_max() {
        let p = PhysicalParams::default();
        p.validate().unwrap();
        assert!(p.hover_motor_speed() < 0.6 * p.max_motor_speed);
        assert_eq!(p.gravity(), 9.81);
    }

    #[test]
    fn rejects_non_positive_mass() {
        let p = PhysicalParams { mass: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn kv_round_trip() {
        let p = PhysicalParams { mass: 0.9, linear_drag: [0.0, 0.1, 0.2], ..Default::default() };
        let mut kv = KeyValues::new();
        p.write_kv(&mut kv);
        assert_eq!(PhysicalParams::from_kv(&kv).unwrap(), p);
    }
}
