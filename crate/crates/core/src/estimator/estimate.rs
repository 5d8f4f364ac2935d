use crate::simcore::DroneState;

/// One attitude and rate estimate, in radians and radians per second.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub t_us: u64,
    pub roll: f64,
    pub pitch: f64,
    pub p: f64,
    pub q: f64,
}

impl Estimate {
    pub fn from_state(s: &DroneState, t_us: u64) -> Self {
        Self { t_us, roll: s.roll, pitch: s.pitch, p: s.p, q: s.q }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.roll, self.pitch, self.p, self.q]
    }

    pub fn from_array(t_us: u64, a: [f64; 4]) -> Self {
        Self { t_us, roll: a[0], pitch: a[1], p: a[2], q: a[3] }
    }

    /// From `[φ, θ, p, q]` in degrees and degrees per second.
    pub fn from_degrees(t_us: u64, d: [f64; 4]) -> Self {
        Self::from_array(t_us, d.map(f64::to_radians))
    }

    pub fn to_degrees(&self) -> [f64; 4] {
        self.to_array().map(f64::to_degrees)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}
