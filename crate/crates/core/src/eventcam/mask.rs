use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskMode {
    #[default]
    Full,
    /// Every other pixel in both axes.
    Half,
    /// Every fourth pixel in both axes.
    Quarter,
}

impl MaskMode {
    pub fn stride(self) -> usize {
        match self {
            Self::Full => 1,
            Self::Half => 2,
            Self::Quarter => 4,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Self::Full => 0,
            Self::Half => 1,
            Self::Quarter => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Self::Full),
            1 => Ok(Self::Half),
            2 => Ok(Self::Quarter),
            _ => Err(Error::format("event file", format!("unknown mask code {c}"))),
        }
    }
}

impl FromStr for MaskMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "half" => Ok(Self::Half),
            "quarter" => Ok(Self::Quarter),
            _ => Err(Error::Config(format!("unknown mask {s:?}; expected full, half or quarter"))),
        }
    }
}

impl fmt::Display for MaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::Half => "half",
            Self::Quarter => "quarter",
        })
    }
}

/// Enabled-pixel set of a sensor. Enabled pixels sit at native coordinates
/// that are multiples of the stride and are addressed on the compacted grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelMask {
    pub mode: MaskMode,
    pub sensor_width: usize,
    pub sensor_height: usize,
}

impl PixelMask {
    pub fn new(mode: MaskMode, sensor_width: usize, sensor_height: usize) -> Result<Self> {
        let s = mode.stride();
        if sensor_width % s != 0 || sensor_height % s != 0 {
            return Err(Error::Config(format!(
                "sensor {sensor_width}x{sensor_height} not divisible by mask stride {s}"
            )));
        }
        Ok(Self { mode, sensor_width, sensor_height })
    }

    pub fn width(&self) -> usize {
        self.sensor_width / self.mode.stride()
    }

    pub fn height(&self) -> usize {
        self.sensor_height / self.mode.stride()
    }

    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Native sensor coordinate of compacted pixel `(gx, gy)`.
    pub fn native(&self, gx: usize, gy: usize) -> (usize, usize) {
        let s = self.mode.stride();
        (gx * s, gy * s)
    }

    pub fn is_enabled(&self, x: usize, y: usize) -> bool {
        let s = self.mode.stride();
        x < self.sensor_width && y < self.sensor_height && x % s == 0 && y % s == 0
    }
}
