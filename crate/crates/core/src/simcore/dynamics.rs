use crate::error::{Error, Result};
use crate::simcore::planar::PlanarState;
use crate::simcore::{PhysicalParams, GRAVITY};

/// Full rigid-body state. Velocities and rates are body-frame (FRD); `z` is
/// height above ground, positive up.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DroneState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl DroneState {
    pub fn at_height(z: f64) -> Self {
        Self { z, ..Default::default() }
    }

    pub fn to_array(&self) -> [f64; 12] {
        [
            self.x, self.y, self.z, self.vx, self.vy, self.vz, self.roll, self.pitch, self.yaw, self.p, self.q,
            self.r,
        ]
    }

    pub fn from_array(a: [f64; 12]) -> Self {
        Self {
            x: a[0],
            y: a[1],
            z: a[2],
            vx: a[3],
            vy: a[4],
            vz: a[5],
            roll: a[6],
            pitch: a[7],
            yaw: a[8],
            p: a[9],
            q: a[10],
            r: a[11],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Roll-axis reduced state `[υ_y, φ, z]`.
    pub fn planar_roll(&self) -> PlanarState<f64> {
        PlanarState { vy: self.vy, roll: self.roll, z: self.z }
    }

    /// Pitch-axis reduced state. Forward velocity is negated so that the
    /// pitch axis obeys the same `υ̇ = g·tan(angle)` law as roll.
    pub fn planar_pitch(&self) -> PlanarState<f64> {
        PlanarState { vy: -self.vx, roll: self.pitch, z: self.z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorSpeeds(pub [f64; 4]);

impl MotorSpeeds {
    pub fn uniform(w: f64) -> Self {
        Self([w; 4])
    }

    pub fn validate(&self, params: &PhysicalParams) -> Result<()> {
        for (i, w) in self.0.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 || *w > params.max_motor_speed * (1.0 + 1e-12) {
                return Err(Error::Domain(format!("motor {} speed {w} outside [0, max]", i + 1)));
            }
        }
        Ok(())
    }
}

/// Collective thrust (N, along body `−z`) and body torques (N·m).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub thrust: f64,
    pub torque: [f64; 3],
}

/// Thrust and torques produced by the rotors at the given speeds.
pub fn body_wrench(motors: &MotorSpeeds, params: &PhysicalParams) -> Wrench {
    let geo = params.geometry();
    let mut w = Wrench::default();
    for i in 0..4 {
        let sq = motors.0[i] * motors.0[i];
        let f = params.thrust_coeff * sq;
        let [px, py] = geo.positions[i];
        w.thrust += f;
        w.torque[0] -= py * f;
        w.torque[1] += px * f;
        w.torque[2] += geo.spin[i] * params.torque_coeff * sq;
    }
    w
}

/// Body-to-world rotation for ZYX Euler angles (world axes north-east-down).
pub fn euler_to_rotation(roll: f64, pitch: f64, yaw: f64) -> [[f64; 3]; 3] {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    [
        [cp * cy, sr * sp * cy - cr * sy, cr * sp * cy + sr * sy],
        [cp * sy, sr * sp * sy + cr * cy, cr * sp * sy - sr * cy],
        [-sp, sr * cp, cr * cp],
    ]
}

/// World-frame velocity `[north, east, up]`.
pub fn world_velocity(s: &DroneState) -> [f64; 3] {
    let r = euler_to_rotation(s.roll, s.pitch, s.yaw);
    let v = [s.vx, s.vy, s.vz];
    let ned: Vec<f64> = (0..3).map(|i| (0..3).map(|j| r[i][j] * v[j]).sum()).collect();
    [ned[0], ned[1], -ned[2]]
}

/// Translational plus rotational kinetic energy plus potential energy.
pub fn mechanical_energy(s: &DroneState, params: &PhysicalParams) -> f64 {
    let i = params.inertia();
    let kt = 0.5 * params.mass * (s.vx * s.vx + s.vy * s.vy + s.vz * s.vz);
    let kr = 0.5 * (i[0] * s.p * s.p + i[1] * s.q * s.q + i[2] * s.r * s.r);
    kt + kr + params.mass * GRAVITY * s.z
}

fn derivative(s: &[f64; 12], wrench: &Wrench, params: &PhysicalParams) -> [f64; 12] {
    let [_, _, _, u, v, w, roll, pitch, yaw, p, q, r] = *s;
    let rot = euler_to_rotation(roll, pitch, yaw);
    let vb = [u, v, w];
    let vel = |i: usize| rot[i][0] * vb[0] + rot[i][1] * vb[1] + rot[i][2] * vb[2];

    let m = params.mass;
    let d = params.linear_drag;
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let gb = [-GRAVITY * sp, GRAVITY * sr * cp, GRAVITY * cr * cp];
    let fx = -d[0] * u;
    let fy = -d[1] * v;
    let fz = -wrench.thrust - d[2] * w;
    // v̇ = F/m + g_b − ω × v
    let du = fx / m + gb[0] - (q * w - r * v);
    let dv = fy / m + gb[1] - (r * u - p * w);
    let dw = fz / m + gb[2] - (p * v - q * u);

    let tp = sp / cp;
    let droll = p + (q * sr + r * cr) * tp;
    let dpitch = q * cr - r * sr;
    let dyaw = (q * sr + r * cr) / cp;

    let [ix, iy, iz] = params.inertia();
    let t = wrench.torque;
    let dp = (t[0] - (q * iz * r - r * iy * q)) / ix;
    let dq = (t[1] - (r * ix * p - p * iz * r)) / iy;
    let dr = (t[2] - (p * iy * q - q * ix * p)) / iz;

    [vel(0), vel(1), -vel(2), du, dv, dw, droll, dpitch, dyaw, dp, dq, dr]
}

/// RK4 step of the Newton–Euler equations with rotor speeds held constant
/// over `dt`.
pub fn step_full_dynamics(
    state: &DroneState,
    motors: &MotorSpeeds,
    params: &PhysicalParams,
    dt: f64,
) -> Result<DroneState> {
    if !(dt > 0.0 && dt <= 0.005) {
        return Err(Error::Domain(format!("physics step {dt} s outside (0, 0.005]")));
    }
    if !state.is_finite() {
        return Err(Error::Numeric("non-finite state".into()));
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    if state.roll.abs() >= half_pi || state.pitch.abs() >= half_pi {
        return Err(Error::Crash(format!(
            "attitude left the valid envelope (roll {:.3}, pitch {:.3} rad)",
            state.roll, state.pitch
        )));
    }
    motors.validate(params)?;
    let wrench = body_wrench(motors, params);
    let x = state.to_array();
    let shift = |k: &[f64; 12], s: f64| {
        let mut o = x;
        for i in 0..12 {
            o[i] += s * k[i];
        }
        o
    };
    let k1 = derivative(&x, &wrench, params);
    let k2 = derivative(&shift(&k1, dt / 2.0), &wrench, params);
    let k3 = derivative(&shift(&k2, dt / 2.0), &wrench, params);
    let k4 = derivative(&shift(&k3, dt), &wrench, params);
    let mut out = x;
    for i in 0..12 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let next = DroneState::from_array(out);
    if !next.is_finite() {
        return Err(Error::Numeric("state became non-finite".into()));
    }
    if next.z <= 0.0 {
        return Err(Error::Crash("ground contact".into()));
    }
    Ok(next)
}

/// First-order rotor response to speed commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorLag {
    pub speeds: MotorSpeeds,
}

impl MotorLag {
    pub fn new(initial: MotorSpeeds) -> Self {
        Self { speeds: initial }
    }

    pub fn update(&mut self, command: &MotorSpeeds, params: &PhysicalParams, dt: f64) -> MotorSpeeds {
        let a = 1.0 - (-dt / params.motor_time_constant).exp();
        for i in 0..4 {
            let target = command.0[i].clamp(0.0, params.max_motor_speed);
            self.speeds.0[i] += (target - self.speeds.0[i]) * a;
        }
        self.speeds
    }
}

/// Rigid body plus rotor lag, advanced at a fixed physics rate.
#[derive(Debug, Clone)]
pub struct Quadrotor {
    pub state: DroneState,
    pub motors: MotorLag,
    pub params: PhysicalParams,
    pub time_s: f64,
}

impl Quadrotor {
    /// Starts at rest at height `z`, rotors spinning at hover speed.
    pub fn hovering(params: PhysicalParams, z: f64) -> Self {
        let w = params.hover_motor_speed();
        Self { state: DroneState::at_height(z), motors: MotorLag::new(MotorSpeeds::uniform(w)), params, time_s: 0.0 }
    }

    pub fn step(&mut self, command: &MotorSpeeds, dt: f64) -> Result<()> {
        let speeds = self.motors.update(command, &self.params, dt);
        self.state = step_full_dynamics(&self.state, &speeds, &self.params, dt).map_err(|e| match e {
            Error::Crash(reason) => Error::Crash(format!("t = {:.3} s: {reason}", self.time_s + dt)),
            other => other,
        })?;
        self.time_s += dt;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_drag() -> PhysicalParams {
        PhysicalParams { linear_drag: [0.0; 3], ..Default::default() }
    }

    #[test]
    fn hover_is_equilibrium() {
        let params = PhysicalParams::default();
        let s = DroneState::at_height(1.0);
        let m = MotorSpeeds::uniform(params.hover_motor_speed());
        let n = step_full_dynamics(&s, &m, &params, 0.001).unwrap();
        for (a, b) in n.to_array().iter().zip(s.to_array()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_motors_free_fall() {
        let params = no_drag();
        let s = DroneState::at_height(10.0);
        let n = step_full_dynamics(&s, &MotorSpeeds::default(), &params, 0.001).unwrap();
        let climb = world_velocity(&n)[2];
        assert!((climb / 0.001 + GRAVITY).abs() < 1e-9);
    }

    #[test]
    fn energy_conserved_in_ballistic_tumble() {
        let params = no_drag();
        let mut s = DroneState { z: 20.0, vx: 1.0, vy: -0.5, p: 1.5, q: -0.7, r: 0.9, ..Default::default() };
        let e0 = mechanical_energy(&s, &params);
        for _ in 0..1000 {
            s = step_full_dynamics(&s, &MotorSpeeds::default(), &params, 0.001).unwrap();
        }
        let e1 = mechanical_energy(&s, &params);
        assert!(((e1 - e0) / e0).abs() < 1e-6, "{e0} -> {e1}");
    }

    #[test]
    fn asymmetric_motors_produce_expected_torque_signs() {
        let params = PhysicalParams::default();
        let h = params.hover_motor_speed();
        // Left motors (2 rear-left, 3 front-left) faster: right side goes down.
        let m = MotorSpeeds([h, h * 1.05, h * 1.05, h]);
        let s = step_full_dynamics(&DroneState::at_height(1.0), &m, &params, 0.001).unwrap();
        assert!(s.p > 0.0);
        assert!(s.q.abs() < 1e-12);
        // Front motors faster: nose up.
        let m = MotorSpeeds([h * 1.05, h, h * 1.05, h]);
        let s = step_full_dynamics(&DroneState::at_height(1.0), &m, &params, 0.001).unwrap();
        assert!(s.q > 0.0);
    }

    #[test]
    fn ground_contact_is_crash() {
        let s = DroneState::at_height(0.0001);
        let err = step_full_dynamics(&s, &MotorSpeeds::default(), &no_drag(), 0.005).unwrap_err();
        assert!(matches!(err, Error::Crash(_)));
    }

    #[test]
    fn nan_state_rejected() {
        let s = DroneState { x: f64::NAN, z: 1.0, ..Default::default() };
        let params = PhysicalParams::default();
        assert!(matches!(
            step_full_dynamics(&s, &MotorSpeeds::default(), &params, 0.001),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn rotation_is_orthonormal() {
        let r = euler_to_rotation(0.3, -0.2, 1.1);
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((d - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn motor_lag_time_constant() {
        let params = PhysicalParams::default();
        let mut lag = MotorLag::new(MotorSpeeds::default());
        let cmd = MotorSpeeds::uniform(1000.0);
        for _ in 0..30 {
            lag.update(&cmd, &params, 0.001);
        }
        let expect = 1000.0 * (1.0 - (-1.0f64).exp());
        assert!((lag.speeds.0[0] - expect).abs() < 1e-9);
    }
}
