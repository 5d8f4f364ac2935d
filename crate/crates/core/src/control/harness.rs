use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::control::{mix, position_hold, Cascade, ControlCommand, ControlGains, FlightLog, FlightRow};
use crate::ekf::{ekf_predict, ekf_update, EkfConfig, FilterMode, FilterState};
use crate::error::{Error, Result};
use crate::estimator::{Estimate, EstimatorNetwork};
use crate::eventcam::{OnlineCamera, Pose, SensorSetup, BIN_US};
use crate::simcore::{ventral_flow, DroneState, Quadrotor, Scenario};

/// Control and estimation period.
pub const CONTROL_DT: f64 = 0.005;
const PHYSICS_PER_TICK: usize = 5;
const PHYSICS_DT: f64 = CONTROL_DT / PHYSICS_PER_TICK as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceMode {
    GroundTruth,
    Network,
    Ekf,
}

impl FromStr for SourceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ground_truth" | "gt" | "imu" => Ok(Self::GroundTruth),
            "network" => Ok(Self::Network),
            "ekf" => Ok(Self::Ekf),
            _ => Err(Error::Config(format!("unknown estimate source {s:?}"))),
        }
    }
}

impl fmt::Display for SourceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GroundTruth => "ground_truth",
            Self::Network => "network",
            Self::Ekf => "ekf",
        })
    }
}

/// Which estimate feeds the attitude loop, with an optional scripted switch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateSource {
    pub initial: SourceMode,
    pub switch: Option<(f64, SourceMode)>,
}

impl EstimateSource {
    pub fn fixed(mode: SourceMode) -> Self {
        Self { initial: mode, switch: None }
    }

    pub fn switching(from: SourceMode, at_s: f64, to: SourceMode) -> Self {
        Self { initial: from, switch: Some((at_s, to)) }
    }

    pub fn active(&self, t: f64) -> SourceMode {
        match self.switch {
            Some((at, to)) if t >= at => to,
            _ => self.initial,
        }
    }

    pub fn uses(&self, mode: SourceMode) -> bool {
        self.initial == mode || self.switch.is_some_and(|(_, m)| m == mode)
    }
}

#[derive(Debug, Clone)]
pub struct FlightOptions {
    pub scenario: Scenario,
    pub gains: ControlGains,
    pub source: EstimateSource,
    pub sensor: SensorSetup,
    pub ekf: EkfConfig,
    /// Initial roll and pitch, rad, for disturbance tests.
    pub initial_attitude: [f64; 2],
    /// Render the camera even when no network consumes its frames.
    pub always_render: bool,
}

impl FlightOptions {
    pub fn new(scenario: Scenario, source: EstimateSource) -> Self {
        Self {
            scenario,
            gains: ControlGains::default(),
            source,
            sensor: SensorSetup::default(),
            ekf: EkfConfig { mode: FilterMode::Extended, ..Default::default() },
            initial_attitude: [0.0; 2],
            always_render: false,
        }
    }
}

/// Headline numbers of one flight.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightSummary {
    pub duration_s: f64,
    pub crashed: bool,
    pub max_abs_attitude_deg: f64,
    /// Share of ticks (after the switch, if any) where both attitude
    /// estimate errors lie within ±3°.
    pub estimate_within_3deg: f64,
    /// Share of those ticks where both rate errors lie within ±18°/s.
    pub rate_within_18dps: f64,
    /// RMS horizontal distance to the target over the second half.
    pub position_rms_m: f64,
    /// Time from the switch until the attitude stays within 1° of its
    /// setpoint for good.
    pub settle_after_switch_s: Option<f64>,
}

impl FlightSummary {
    pub fn from_log(log: &FlightLog) -> Self {
        let deg = f64::to_degrees;
        let max_abs_attitude_deg =
            log.rows.iter().map(|r| deg(r.truth.roll.abs().max(r.truth.pitch.abs()))).fold(0.0, f64::max);
        let from_us = log.switch_s.map_or(0, |s| (s * 1e6).round() as u64);
        let judged: Vec<&FlightRow> = log.rows.iter().filter(|r| r.t_us >= from_us).collect();
        let share = |ok: &dyn Fn(&FlightRow) -> bool| {
            if judged.is_empty() {
                0.0
            } else {
                judged.iter().filter(|r| ok(r)).count() as f64 / judged.len() as f64
            }
        };
        let estimate_within_3deg = share(&|r| {
            deg(r.estimate.roll - r.truth.roll).abs() <= 3.0 && deg(r.estimate.pitch - r.truth.pitch).abs() <= 3.0
        });
        let rate_within_18dps =
            share(&|r| deg(r.estimate.p - r.truth.p).abs() <= 18.0 && deg(r.estimate.q - r.truth.q).abs() <= 18.0);
        let half = &log.rows[log.rows.len() / 2..];
        let position_rms_m = if half.is_empty() {
            f64::NAN
        } else {
            let ss: f64 = half.iter().map(|r| (r.truth.x - r.target[0]).powi(2) + (r.truth.y - r.target[1]).powi(2)).sum();
            (ss / half.len() as f64).sqrt()
        };
        let settle_after_switch_s = log.switch_s.and_then(|s| {
            if log.crash.is_some() {
                return None;
            }
            let off = |r: &FlightRow| {
                deg(r.truth.roll - r.attitude_setpoint[0]).abs() >= 1.0
                    || deg(r.truth.pitch - r.attitude_setpoint[1]).abs() >= 1.0
            };
            let last_off = judged.iter().rposition(|r| off(r));
            Some(match last_off {
                None => 0.0,
                Some(i) if i + 1 < judged.len() => judged[i + 1].t_us as f64 * 1e-6 - s,
                Some(_) => return None,
            })
        });
        Self {
            duration_s: log.duration_s(),
            crashed: log.crash.is_some(),
            max_abs_attitude_deg,
            estimate_within_3deg,
            rate_within_18dps,
            position_rms_m,
            settle_after_switch_s,
        }
    }
}

/// Optical-flow EKF pair for the roll and pitch axes, driven by the
/// commanded torques.
struct FlowFilters {
    cfg: EkfConfig,
    roll: FilterState,
    pitch: FilterState,
    noise: Normal<f64>,
    rng: ChaCha8Rng,
}

impl FlowFilters {
    fn new(cfg: EkfConfig, s: &DroneState, seed: u64) -> Result<Self> {
        let var = [0.01, 0.01, 0.01, 0.001];
        let roll = FilterState::new(FilterMode::Extended, &[0.0, 0.0, 0.0, s.z], &var)?;
        let pitch = roll.clone();
        let noise = Normal::new(0.0, cfg.flow_sigma).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self { cfg, roll, pitch, noise, rng: ChaCha8Rng::seed_from_u64(seed ^ 0xeeff) })
    }

    fn step(&mut self, truth: &DroneState, torque: [f64; 3], inertia: [f64; 3]) -> Result<Estimate> {
        let axes = [
            (&mut self.roll, truth.planar_roll(), truth.p, torque[0], inertia[0]),
            (&mut self.pitch, truth.planar_pitch(), truth.q, torque[1], inertia[1]),
        ];
        for (fs, planar, rate, moment, inertia) in axes {
            let cfg = EkfConfig { inertia, ..self.cfg.clone() };
            ekf_predict(fs, moment, CONTROL_DT, &cfg)?;
            let measured = ventral_flow(planar, rate)? + self.noise.sample(&mut self.rng);
            ekf_update(fs, measured, 0.0, &cfg)?;
        }
        Ok(Estimate { t_us: 0, roll: self.roll.x[1], pitch: self.pitch.x[1], p: self.roll.x[2], q: self.pitch.x[2] })
    }
}

/// Flies `opts.scenario` with 1 kHz physics and a 200 Hz control loop.
///
/// A network, when given, runs on every tick on the frame that ended at
/// that tick, and its output reaches the controller one tick later. At a
/// source switch the rate-loop integrators are reset.
pub fn closed_loop_run(opts: &FlightOptions, mut network: Option<&mut EstimatorNetwork<f32>>) -> Result<FlightLog> {
    opts.gains.validate()?;
    let sc = &opts.scenario;
    sc.params.validate()?;
    if opts.source.uses(SourceMode::Network) && network.is_none() {
        return Err(Error::Config("network source selected but no checkpoint loaded".into()));
    }
    if let Some(net) = network.as_deref() {
        let want = opts.sensor.frame_size();
        let cfg = net.config();
        if (cfg.width, cfg.height) != want {
            return Err(Error::Config(format!(
                "network expects {}x{} frames, sensor produces {}x{}",
                cfg.width, cfg.height, want.0, want.1
            )));
        }
    }
    let mut camera = if network.is_some() || opts.always_render {
        Some(OnlineCamera::new(opts.sensor.clone())?)
    } else {
        None
    };
    if let Some(net) = network.as_deref_mut() {
        net.reset_memory();
    }

    let mut quad = Quadrotor::hovering(sc.params.clone(), sc.target_at(0.0)[2]);
    quad.state.x = sc.target_at(0.0)[0];
    quad.state.y = sc.target_at(0.0)[1];
    quad.state.roll = opts.initial_attitude[0];
    quad.state.pitch = opts.initial_attitude[1];
    let mut cascade = Cascade::new(opts.gains.clone(), sc.params.clone());
    let mut filters = FlowFilters::new(opts.ekf.clone(), &quad.state, sc.seed)?;
    let uses_ekf = opts.source.uses(SourceMode::Ekf);
    let inertia = sc.params.inertia();

    let ticks = (sc.duration_s / CONTROL_DT).round() as usize;
    let mut log = FlightLog { rows: Vec::with_capacity(ticks), crash: None, switch_s: None };
    let mut pending_network: Option<Estimate> = None;
    let mut last_torque = [0.0; 3];
    let mut last_mode = opts.source.active(0.0);
    if let Some(cam) = camera.as_mut() {
        cam.observe(&Pose::from_state(&quad.state), 0)?;
    }

    for k in 0..ticks {
        let t = k as f64 * CONTROL_DT;
        let t_us = k as u64 * BIN_US;
        let truth = quad.state;

        // Frame [t − 5 ms, t) is complete; its estimate is used next tick.
        let ready_network = pending_network.take();
        let mut event_count = 0;
        if let Some(cam) = camera.as_mut() {
            if k > 0 {
                let frame = cam.take_frame(t_us - BIN_US)?;
                event_count = frame.total();
                if let Some(net) = network.as_deref_mut() {
                    let aux = net.variant().aux_values(quad.motors.speeds.0, [truth.p, truth.q, truth.r]);
                    pending_network = Some(net.step(&frame, aux.as_deref())?);
                }
            }
        }
        // The filter only rides along when it can take control.
        let ekf_est = if uses_ekf {
            filters.step(&truth, last_torque, inertia).map_err(|e| match e {
                Error::Domain(m) => Error::Numeric(format!("flow filter left its domain at t = {t:.3} s: {m}")),
                e => e,
            })?
        } else {
            Estimate::default()
        };

        let mode = opts.source.active(t);
        if mode != last_mode {
            cascade.reset_integrators();
            log.switch_s = Some(t);
            last_mode = mode;
        }
        let estimate = match mode {
            SourceMode::GroundTruth => Estimate::from_state(&truth, t_us),
            SourceMode::Ekf => Estimate { t_us, ..ekf_est },
            // Until the first output arrives the vehicle holds level.
            SourceMode::Network => ready_network.map_or(Estimate { t_us, ..Default::default() }, |e| Estimate { t_us, ..e }),
        };

        let target = sc.target_at(t);
        let outer = position_hold(target, &truth, &opts.gains.position);
        let sp = [outer.roll, outer.pitch];
        let cmd: ControlCommand = cascade.command(sp, 0.0, &estimate, &truth, outer.climb_accel, CONTROL_DT);
        if !cmd.is_finite() {
            return Err(Error::Numeric(format!("non-finite control command at t = {t:.3} s")));
        }
        let mixed = mix(&cmd, &sc.params);
        last_torque = cmd.torque;
        log.rows.push(FlightRow {
            t_us,
            truth,
            estimate,
            network: ready_network,
            target,
            attitude_setpoint: sp,
            rate_setpoint: [cascade.last_rate_setpoint[0], cascade.last_rate_setpoint[1]],
            climb_accel: outer.climb_accel,
            torque: cmd.torque,
            thrust: cmd.thrust,
            motors: mixed.speeds.0,
            source: mode,
            event_count,
            saturated: mixed.saturated,
        });

        for j in 0..PHYSICS_PER_TICK {
            match quad.step(&mixed.speeds, PHYSICS_DT) {
                Ok(()) => {}
                Err(Error::Crash(reason)) => {
                    log.crash = Some(reason);
                    return Ok(log);
                }
                Err(e) => return Err(e),
            }
            if let Some(cam) = camera.as_mut() {
                cam.observe(&Pose::from_state(&quad.state), t_us + (j as u64 + 1) * (BIN_US / PHYSICS_PER_TICK as u64))?;
            }
        }
    }
    Ok(log)
}

/// Recomputes the controller output of every logged tick from the logged
/// estimates and truth.
pub fn replay_commands(log: &FlightLog, opts: &FlightOptions) -> Vec<ControlCommand> {
    let mut cascade = Cascade::new(opts.gains.clone(), opts.scenario.params.clone());
    let mut last = log.rows.first().map(|r| r.source);
    log.rows
        .iter()
        .map(|r| {
            if Some(r.source) != last {
                cascade.reset_integrators();
                last = Some(r.source);
            }
            let outer = position_hold(r.target, &r.truth, &opts.gains.position);
            cascade.command([outer.roll, outer.pitch], 0.0, &r.estimate, &r.truth, outer.climb_accel, CONTROL_DT)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_schedule() {
        let s = EstimateSource::switching(SourceMode::GroundTruth, 10.0, SourceMode::Network);
        assert_eq!(s.active(9.995), SourceMode::GroundTruth);
        assert_eq!(s.active(10.0), SourceMode::Network);
        assert!(s.uses(SourceMode::Network) && !s.uses(SourceMode::Ekf));
        assert_eq!("ekf".parse::<SourceMode>().unwrap(), SourceMode::Ekf);
    }

    #[test]
    fn network_source_needs_network() {
        let opts = FlightOptions::new(Scenario::hover(1, 1.0), EstimateSource::fixed(SourceMode::Network));
        assert!(matches!(closed_loop_run(&opts, None), Err(Error::Config(_))));
    }

    #[test]
    fn short_ground_truth_hover_is_level() {
        let opts = FlightOptions::new(Scenario::hover(1, 2.0), EstimateSource::fixed(SourceMode::GroundTruth));
        let log = closed_loop_run(&opts, None).unwrap();
        assert_eq!(log.rows.len(), 400);
        let s = FlightSummary::from_log(&log);
        assert!(!s.crashed && s.max_abs_attitude_deg < 0.5);
        assert_eq!(s.estimate_within_3deg, 1.0);
    }
}
