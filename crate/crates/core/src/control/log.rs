use std::fmt::Write as _;
use std::path::Path;

use crate::control::SourceMode;
use crate::error::{Error, Result};
use crate::estimator::Estimate;
use crate::simcore::DroneState;

/// One 200 Hz control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightRow {
    pub t_us: u64,
    pub truth: DroneState,
    /// Estimate the controller acted on.
    pub estimate: Estimate,
    /// Latest network output, when a network rides along.
    pub network: Option<Estimate>,
    pub target: [f64; 3],
    pub attitude_setpoint: [f64; 2],
    pub rate_setpoint: [f64; 2],
    pub climb_accel: f64,
    pub torque: [f64; 3],
    pub thrust: f64,
    pub motors: [f64; 4],
    pub source: SourceMode,
    pub event_count: u64,
    pub saturated: bool,
}

/// Everything recorded during a flight. A crash ends the run early and is
/// recorded here rather than returned as an error.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlightLog {
    pub rows: Vec<FlightRow>,
    pub crash: Option<String>,
    /// Time of the estimate-source switch, if one happened.
    pub switch_s: Option<f64>,
}

const COLUMNS: &[&str] = &[
    "t_us", "x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi", "p", "q", "r", "est_phi", "est_theta", "est_p",
    "est_q", "net_phi", "net_theta", "net_p", "net_q", "target_x", "target_y", "target_z", "phi_sp", "theta_sp",
    "p_sp", "q_sp", "climb_accel", "tau_x", "tau_y", "tau_z", "thrust", "m1", "m2", "m3", "m4", "source",
    "event_count", "saturated",
];

impl FlightLog {
    pub fn duration_s(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t_us as f64 * 1e-6)
    }

    pub fn header() -> String {
        COLUMNS.join(",")
    }

    /// CSV with full-precision floats, so [`FlightLog::from_csv`] restores
    /// the rows exactly.
    pub fn to_csv(&self) -> String {
        self.write_csv(false)
    }

    /// Same columns with angles in degrees and rates in deg/s, for reports.
    /// Lossy: [`FlightLog::from_csv`] expects the radian form.
    pub fn to_csv_degrees(&self) -> String {
        self.write_csv(true)
    }

    fn write_csv(&self, degrees: bool) -> String {
        // Positions in the float columns holding angles or angular rates.
        let angular = |i: usize| (6..20).contains(&i) || (23..27).contains(&i);
        let mut s = Self::header();
        s.push('\n');
        for r in &self.rows {
            let t = r.truth.to_array();
            let e = r.estimate.to_array();
            let n = r.network.map_or([f64::NAN; 4], |n| n.to_array());
            write!(s, "{}", r.t_us).unwrap();
            let floats = t
                .iter()
                .chain(&e)
                .chain(&n)
                .chain(&r.target)
                .chain(&r.attitude_setpoint)
                .chain(&r.rate_setpoint)
                .chain(std::iter::once(&r.climb_accel))
                .chain(&r.torque)
                .chain(std::iter::once(&r.thrust))
                .chain(&r.motors);
            for (i, &v) in floats.enumerate() {
                let v = if degrees && angular(i) { v.to_degrees() } else { v };
                write!(s, ",{v}").unwrap();
            }
            writeln!(s, ",{},{},{}", r.source, r.event_count, u8::from(r.saturated)).unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(Self::header().as_str()) {
            return Err(Error::format("flight log", "unexpected header"));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |what: &str| Error::format("flight log", format!("line {}: {what}", i + 2));
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != COLUMNS.len() {
                return Err(bad("wrong column count"));
            }
            let f: Vec<f64> = cells[1..37].iter().map(|c| c.parse()).collect::<Result<_, _>>().map_err(|_| bad("bad number"))?;
            let t_us = cells[0].parse().map_err(|_| bad("bad time"))?;
            let arr4 = |o: usize| [f[o], f[o + 1], f[o + 2], f[o + 3]];
            let net = arr4(16);
            rows.push(FlightRow {
                t_us,
                truth: DroneState::from_array(f[0..12].try_into().unwrap()),
                estimate: Estimate::from_array(t_us, arr4(12)),
                network: (!net[0].is_nan()).then(|| Estimate::from_array(t_us, net)),
                target: [f[20], f[21], f[22]],
                attitude_setpoint: [f[23], f[24]],
                rate_setpoint: [f[25], f[26]],
                climb_accel: f[27],
                torque: [f[28], f[29], f[30]],
                thrust: f[31],
                motors: arr4(32),
                source: cells[37].parse().map_err(|_| bad("bad source"))?,
                event_count: cells[38].parse().map_err(|_| bad("bad event count"))?,
                saturated: cells[39] == "1",
            });
        }
        Ok(Self { rows, crash: None, switch_s: None })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
