use crate::control::PositionGains;
use crate::simcore::{world_velocity, DroneState, GRAVITY};

/// Output of the outer loop: attitude setpoints (rad) and the vertical
/// acceleration request (m/s², up positive) for the thrust channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OuterCommand {
    pub roll: f64,
    pub pitch: f64,
    pub climb_accel: f64,
}

/// Cascaded P position → P velocity hold. Position and velocity come from
/// the simulator, standing in for a flow/range sensor.
///
/// `target` is `[north, east, height]`.
pub fn position_hold(target: [f64; 3], state: &DroneState, gains: &PositionGains) -> OuterCommand {
    let v = world_velocity(state);
    let pos = [state.x, state.y];
    let mut v_sp = [0, 1].map(|i| gains.position_p * (target[i] - pos[i]));
    let speed = v_sp[0].hypot(v_sp[1]);
    if speed > gains.max_speed {
        v_sp = v_sp.map(|c| c * gains.max_speed / speed);
    }
    let a = [0, 1].map(|i| gains.velocity_p * (v_sp[i] - v[i]));
    let (sy, cy) = state.yaw.sin_cos();
    let forward = cy * a[0] + sy * a[1];
    let right = -sy * a[0] + cy * a[1];
    // FRD: nose-up pitch tilts thrust backwards, right-down roll tilts it right.
    let pitch = (-forward / GRAVITY).atan().clamp(-gains.max_tilt, gains.max_tilt);
    let roll = (right / GRAVITY).atan().clamp(-gains.max_tilt, gains.max_tilt);
    let climb_accel = gains.altitude_p * (target[2] - state.z) - gains.altitude_d * v[2];
    OuterCommand { roll, pitch, climb_accel }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn at_target_commands_level() {
        let s = DroneState::at_height(1.0);
        let c = position_hold([0.0, 0.0, 1.0], &s, &PositionGains::default());
        assert_eq!(c.roll, 0.0);
        assert_eq!(c.pitch, 0.0);
        assert_eq!(c.climb_accel, 0.0);
    }

    #[test]
    fn displaced_forward_leans_back_toward_target() {
        let s = DroneState { x: 0.5, z: 1.0, ..Default::default() };
        let c = position_hold([0.0, 0.0, 1.0], &s, &PositionGains::default());
        assert!(c.pitch > 0.0, "nose-up pitch decelerates toward −x in FRD");
        assert_eq!(c.roll, 0.0);
    }

    #[test]
    fn displaced_left_rolls_right() {
        let s = DroneState { y: -0.5, z: 1.0, ..Default::default() };
        let c = position_hold([0.0, 0.0, 1.0], &s, &PositionGains::default());
        assert!(c.roll > 0.0);
    }

    #[test]
    fn tilt_is_clamped() {
        let s = DroneState { x: 50.0, y: -50.0, z: 1.0, vx: 10.0, ..Default::default() };
        let g = PositionGains::default();
        let c = position_hold([0.0, 0.0, 1.0], &s, &g);
        assert!(c.pitch.abs() <= g.max_tilt && c.roll.abs() <= g.max_tilt);
    }
}
