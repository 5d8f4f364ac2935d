use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{mix, position_hold, Cascade, ControlGains};
use crate::error::{Error, Result};
use crate::estimator::Estimate;
use crate::simcore::{DroneState, MotorSpeeds, PhysicalParams, Quadrotor};

/// Physics step of every simulation in the crate.
pub const PHYSICS_DT: f64 = 0.001;
const CONTROL_EVERY: usize = 5;
const MAX_EXCURSION_DEG: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: DroneState,
    pub motors: MotorSpeeds,
}

/// States after each physics step; `samples[k].t = (k + 1)·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub initial: DroneState,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    /// State at physics index `k`, where index 0 is the initial state.
    pub fn state_at(&self, k: usize) -> &DroneState {
        if k == 0 {
            &self.initial
        } else {
            &self.samples[k - 1].state
        }
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }
}

struct SetpointScript {
    rng: ChaCha8Rng,
    difficulty: f64,
    next_change: f64,
    offset: [f64; 2],
    target: [f64; 3],
    yaw: f64,
}

impl SetpointScript {
    fn advance(&mut self, t: f64) {
        if t < self.next_change {
            return;
        }
        let d = self.difficulty;
        let a = MAX_EXCURSION_DEG.to_radians() * d;
        // A fifth of the segments are quiet so that the data also contains
        // low-excitation stretches.
        if self.rng.random::<f64>() < 0.2 {
            self.offset = [0.0; 2];
        } else {
            self.offset = [self.rng.random_range(-a..=a), self.rng.random_range(-a..=a)];
        }
        self.target = [
            self.rng.random_range(-1.5..=1.5) * d,
            self.rng.random_range(-1.5..=1.5) * d,
            1.0 + self.rng.random_range(-0.3..=0.5) * d,
        ];
        self.yaw = self.rng.random_range(-0.5..=0.5) * d;
        self.next_change = t + self.rng.random_range(0.4..=1.5);
    }
}

/// Closed-loop flight on ground-truth feedback that tracks a seeded random
/// setpoint script. `difficulty` in `[0, 1]` scales every excursion; zero
/// gives a pure hover at 1 m.
pub fn generate_excitation_trajectory(
    seed: u64,
    duration_s: f64,
    difficulty: f64,
    params: &PhysicalParams,
) -> Result<Trajectory> {
    if !(duration_s >= 1.0) {
        return Err(Error::Config(format!("trajectory duration {duration_s} s shorter than 1 s")));
    }
    if !(0.0..=1.0).contains(&difficulty) {
        return Err(Error::Config(format!("difficulty {difficulty} outside [0, 1]")));
    }
    params.validate()?;
    let gains = ControlGains::default();
    let mut quad = Quadrotor::hovering(params.clone(), 1.0);
    let mut cascade = Cascade::new(gains.clone(), params.clone());
    let mut script = SetpointScript {
        rng: ChaCha8Rng::seed_from_u64(seed),
        difficulty,
        next_change: 0.0,
        offset: [0.0; 2],
        target: [0.0, 0.0, 1.0],
        yaw: 0.0,
    };
    let n = (duration_s / PHYSICS_DT).round() as usize;
    let limit = MAX_EXCURSION_DEG.to_radians();
    let ctrl_dt = PHYSICS_DT * CONTROL_EVERY as f64;
    let initial = quad.state;
    let mut samples = Vec::with_capacity(n);
    let mut command = MotorSpeeds::uniform(params.hover_motor_speed());
    for k in 0..n {
        let t = k as f64 * PHYSICS_DT;
        if k % CONTROL_EVERY == 0 {
            if difficulty > 0.0 {
                script.advance(t);
            }
            let s = quad.state;
            let outer = position_hold(script.target, &s, &gains.position);
            let sp = [
                (outer.roll + script.offset[0]).clamp(-limit, limit),
                (outer.pitch + script.offset[1]).clamp(-limit, limit),
            ];
            let est = Estimate::from_state(&s, (t * 1e6).round() as u64);
            let cmd = cascade.command(sp, script.yaw, &est, &s, outer.climb_accel, ctrl_dt);
            command = mix(&cmd, params).speeds;
        }
        quad.step(&command, PHYSICS_DT)?;
        samples.push(TrajectorySample { t: (k + 1) as f64 * PHYSICS_DT, state: quad.state, motors: quad.motors.speeds });
    }
    Ok(Trajectory { dt: PHYSICS_DT, initial, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_seconds_is_ten_thousand_samples_and_reproducible() {
        let p = PhysicalParams::default();
        let a = generate_excitation_trajectory(1, 10.0, 1.0, &p).unwrap();
        let b = generate_excitation_trajectory(1, 10.0, 1.0, &p).unwrap();
        assert_eq!(a.samples.len(), 10_000);
        let bits = |t: &Trajectory| -> Vec<u64> {
            t.samples.iter().flat_map(|s| s.state.to_array().map(f64::to_bits)).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        let c = generate_excitation_trajectory(2, 10.0, 1.0, &p).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn zero_difficulty_is_hover() {
        let p = PhysicalParams::default();
        let t = generate_excitation_trajectory(5, 5.0, 0.0, &p).unwrap();
        let max = t.samples.iter().map(|s| s.state.roll.abs().max(s.state.pitch.abs())).fold(0.0, f64::max);
        assert!(max < 1f64.to_radians());
    }

    #[test]
    fn rejects_short_duration() {
        assert!(generate_excitation_trajectory(1, 0.5, 1.0, &PhysicalParams::default()).is_err());
    }
}
