use nalgebra::{Matrix4, Vector4};

use crate::simcore::{MotorSpeeds, PhysicalParams};

/// Collective thrust (N) and body torques (N·m) requested by the controller.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    pub thrust: f64,
    pub torque: [f64; 3],
}

impl ControlCommand {
    pub fn is_finite(&self) -> bool {
        self.thrust.is_finite() && self.torque.iter().all(|t| t.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixResult {
    pub speeds: MotorSpeeds,
    /// Some part of the command could not be met within rotor limits.
    pub saturated: bool,
    /// The thrust request was negative or could not be honoured at all.
    pub infeasible: bool,
}

/// Maps per-rotor thrusts to `[T, τx, τy, τz]`.
pub fn allocation_matrix(params: &PhysicalParams) -> Matrix4<f64> {
    let geo = params.geometry();
    let c = params.torque_coeff / params.thrust_coeff;
    Matrix4::from_fn(|row, i| {
        let [x, y] = geo.positions[i];
        match row {
            0 => 1.0,
            1 => -y,
            2 => x,
            _ => geo.spin[i] * c,
        }
    })
}

/// Converts a thrust/torque command into rotor speeds.
///
/// When the command cannot be met, roll/pitch torque is kept first, then
/// collective thrust, then yaw torque.
pub fn mix(cmd: &ControlCommand, params: &PhysicalParams) -> MixResult {
    let inv = allocation_matrix(params).try_inverse().expect("quad-X allocation is invertible");
    let f_max = params.max_motor_thrust();
    let rp = inv * Vector4::new(0.0, cmd.torque[0], cmd.torque[1], 0.0);
    let yaw = inv * Vector4::new(0.0, 0.0, 0.0, cmd.torque[2]);
    let mut saturated = false;
    let mut infeasible = false;

    let mut rp = rp;
    let spread = rp.max() - rp.min();
    if spread > f_max {
        rp *= f_max / spread;
        saturated = true;
    }

    let (lo, hi) = (-rp.min(), f_max - rp.max());
    let wanted = cmd.thrust / 4.0;
    if cmd.thrust < 0.0 {
        infeasible = true;
    }
    let collective = wanted.clamp(lo, hi);
    if collective != wanted {
        saturated = true;
    }
    let base = rp.add_scalar(collective);

    let mut k = 1.0f64;
    for i in 0..4 {
        let y = yaw[i];
        if y > 0.0 {
            k = k.min((f_max - base[i]) / y);
        } else if y < 0.0 {
            k = k.min(-base[i] / y);
        }
    }
    let k = k.clamp(0.0, 1.0);
    if k < 1.0 {
        saturated = true;
    }
    let thrusts = base + yaw * k;

    let speeds = MotorSpeeds(std::array::from_fn(|i| {
        (thrusts[i].clamp(0.0, f_max) / params.thrust_coeff).sqrt().min(params.max_motor_speed)
    }));
    MixResult { speeds, saturated, infeasible }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Thrust and torques from rotor speeds via explicit `r × F` sums.
    fn torque_sum(speeds: &MotorSpeeds, params: &PhysicalParams) -> [f64; 4] {
        let d = params.arm_length / 2f64.sqrt();
        // front-right, rear-left, front-left, rear-right; z is down.
        let r = [[d, d, 0.0], [-d, -d, 0.0], [d, -d, 0.0], [-d, d, 0.0]];
        let ccw = [true, true, false, false];
        let mut out = [0.0; 4];
        for i in 0..4 {
            let w2 = speeds.0[i] * speeds.0[i];
            let f = [0.0, 0.0, -params.thrust_coeff * w2];
            let cross = [
                r[i][1] * f[2] - r[i][2] * f[1],
                r[i][2] * f[0] - r[i][0] * f[2],
                r[i][0] * f[1] - r[i][1] * f[0],
            ];
            out[0] += -f[2];
            out[1] += cross[0];
            out[2] += cross[1];
            // A counter-clockwise rotor (spin vector along −z) pushes the body along +z.
            out[3] += if ccw[i] { 1.0 } else { -1.0 } * params.torque_coeff * w2;
        }
        out
    }

    #[test]
    fn pure_thrust_equal_speeds() {
        let p = PhysicalParams::default();
        let m = mix(&ControlCommand { thrust: 8.0, torque: [0.0; 3] }, &p);
        assert!(!m.saturated);
        for w in m.speeds.0 {
            assert!((w - m.speeds.0[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn positive_roll_torque_speeds_up_left_pair() {
        let p = PhysicalParams::default();
        let base = mix(&ControlCommand { thrust: 8.0, torque: [0.0; 3] }, &p).speeds.0;
        let m = mix(&ControlCommand { thrust: 8.0, torque: [0.05, 0.0, 0.0] }, &p).speeds.0;
        // motors 2 and 3 are on the left (y < 0).
        assert!(m[1] > base[1] && m[2] > base[2]);
        assert!(m[0] < base[0] && m[3] < base[3]);
        assert!((m[1] - m[2]).abs() < 1e-9 && (m[0] - m[3]).abs() < 1e-9);
    }

    #[test]
    fn torque_sum_recovers_command() {
        let p = PhysicalParams::default();
        let cmd = ControlCommand { thrust: 9.0, torque: [0.04, -0.03, 0.01] };
        let m = mix(&cmd, &p);
        assert!(!m.saturated);
        let back = torque_sum(&m.speeds, &p);
        let want = [cmd.thrust, cmd.torque[0], cmd.torque[1], cmd.torque[2]];
        for i in 0..4 {
            assert!((back[i] - want[i]).abs() <= 1e-9 * want[i].abs().max(1e-3), "{i}: {back:?}");
        }
    }

    #[test]
    fn yaw_sacrificed_before_roll() {
        let p = PhysicalParams::default();
        let cmd = ControlCommand { thrust: 20.0, torque: [0.3, 0.0, 0.3] };
        let m = mix(&cmd, &p);
        assert!(m.saturated);
        let back = torque_sum(&m.speeds, &p);
        assert!((back[1] - 0.3).abs() < 1e-9);
        assert!(back[3] < 0.3);
    }

    #[test]
    fn negative_thrust_flagged() {
        let p = PhysicalParams::default();
        let m = mix(&ControlCommand { thrust: -1.0, torque: [0.0; 3] }, &p);
        assert!(m.infeasible);
        assert!(m.speeds.0.iter().all(|w| *w == 0.0));
    }

    proptest::proptest! {
        #[test]
        fn mixer_round_trip(t in 2.0f64..20.0, tx in -0.08f64..0.08, ty in -0.08f64..0.08, tz in -0.005f64..0.005) {
            let p = PhysicalParams::default();
            let cmd = ControlCommand { thrust: t, torque: [tx, ty, tz] };
            let m = mix(&cmd, &p);
            proptest::prop_assume!(!m.saturated);
            let back = torque_sum(&m.speeds, &p);
            let want = [t, tx, ty, tz];
            for i in 0..4 {
                proptest::prop_assert!((back[i] - want[i]).abs() <= 1e-9 * t);
            }
        }
    }
}
