use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::simcore::PhysicalParams;

/// Position target that becomes active at `t` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub t: f64,
    pub position: [f64; 3],
}

/// A scenario file: physical parameters, seed, duration, a setpoint script,
/// plus whatever other keys the camera, scene and harness read from it.
///
/// ```text
/// seed = 3
/// duration_s = 60
/// difficulty = 1.0
/// setpoints = 0: 0, 0, 1; 20: 0.5, 0, 1.2
/// mass = 0.8
/// texture = horizonful
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub duration_s: f64,
    pub difficulty: f64,
    pub params: PhysicalParams,
    pub setpoints: Vec<Setpoint>,
    /// All keys, including the ones interpreted above.
    pub raw: KeyValues,
}

fn parse_setpoints(text: &str) -> Result<Vec<Setpoint>> {
    let mut out = Vec::new();
    for entry in text.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let bad = || Error::Config(format!("bad setpoint entry {entry:?}, expected `t: x, y, z`"));
        let (t, rest) = entry.split_once(':').ok_or_else(bad)?;
        let t: f64 = t.trim().parse().map_err(|_| bad())?;
        let v: Vec<f64> = rest.split(',').map(|c| c.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
        if v.len() != 3 {
            return Err(bad());
        }
        out.push(Setpoint { t, position: [v[0], v[1], v[2]] });
    }
    if out.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(Error::Config("setpoint times must be nondecreasing".into()));
    }
    Ok(out)
}

impl Scenario {
    pub fn hover(seed: u64, duration_s: f64) -> Self {
        let mut raw = KeyValues::new();
        raw.set("seed", seed);
        raw.set("duration_s", duration_s);
        raw.set("difficulty", 0.0);
        Self {
            seed,
            duration_s,
            difficulty: 0.0,
            params: PhysicalParams::default(),
            setpoints: vec![Setpoint { t: 0.0, position: [0.0, 0.0, 1.0] }],
            raw,
        }
    }

    pub fn from_kv(kv: KeyValues) -> Result<Self> {
        let duration_s: f64 = kv.require("duration_s")?;
        if !(duration_s > 0.0) {
            return Err(Error::Config("duration_s must be positive".into()));
        }
        let difficulty: f64 = kv.parse_or("difficulty", 1.0)?;
        if !(0.0..=1.0).contains(&difficulty) {
            return Err(Error::Config("difficulty must lie in [0, 1]".into()));
        }
        let setpoints = match kv.get("setpoints") {
            Some(s) => parse_setpoints(s)?,
            None => vec![Setpoint { t: 0.0, position: [0.0, 0.0, 1.0] }],
        };
        Ok(Self {
            seed: kv.parse_or("seed", 1)?,
            duration_s,
            difficulty,
            params: PhysicalParams::from_kv(&kv)?,
            setpoints,
            raw: kv,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(KeyValues::load(path)?)
    }

    /// Position target active at time `t`.
    pub fn target_at(&self, t: f64) -> [f64; 3] {
        self.setpoints
            .iter()
            .take_while(|s| s.t <= t)
            .last()
            .or(self.setpoints.first())
            .map(|s| s.position)
            .unwrap_or([0.0, 0.0, 1.0])
    }

    /// Canonical key-value form with the interpreted fields normalised.
    pub fn to_kv(&self) -> KeyValues {
        let mut kv = self.raw.clone();
        kv.set("seed", self.seed);
        kv.set("duration_s", self.duration_s);
        kv.set("difficulty", self.difficulty);
        let sp: Vec<String> = self
            .setpoints
            .iter()
            .map(|s| format!("{}: {}, {}, {}", s.t, s.position[0], s.position[1], s.position[2]))
            .collect();
        kv.set("setpoints", sp.join("; "));
        self.params.write_kv(&mut kv);
        kv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_script_and_overrides() {
        let kv = KeyValues::parse("duration_s = 12\nseed = 9\nmass = 0.9\nsetpoints = 0: 0,0,1; 5: 1, 0, 1.5\n").unwrap();
        let s = Scenario::from_kv(kv).unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.params.mass, 0.9);
        assert_eq!(s.target_at(4.9), [0.0, 0.0, 1.0]);
        assert_eq!(s.target_at(5.0), [1.0, 0.0, 1.5]);
        let again = Scenario::from_kv(s.to_kv()).unwrap();
        assert_eq!(again.setpoints, s.setpoints);
    }

    #[test]
    fn rejects_unsorted_script_and_missing_duration() {
        assert!(Scenario::from_kv(KeyValues::parse("duration_s = 1\nsetpoints = 5: 0,0,1; 1: 0,0,1").unwrap()).is_err());
        assert!(Scenario::from_kv(KeyValues::parse("seed = 1").unwrap()).is_err());
    }
}
