use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::KeyValues;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Events only, convolutional GRU memory.
    Vision,
    /// Events plus the four motor speeds.
    VisionMotor,
    /// Events plus three gyroscope rates.
    VisionGyro,
    /// Events only, memory replaced by feed-forward convolutions.
    VisionFF,
    /// Binary encoder activations and a recurrent spiking memory.
    VisionSNN,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Self::Vision, Self::VisionMotor, Self::VisionGyro, Self::VisionFF, Self::VisionSNN];

    /// Auxiliary input width this variant requires.
    pub fn aux_width(self) -> usize {
        match self {
            Self::VisionMotor => 4,
            Self::VisionGyro => 3,
            _ => 0,
        }
    }

    /// Auxiliary inputs of this variant from rotor speeds (rad/s) and body
    /// rates `[p, q, r]` (rad/s), before the configured scaling.
    pub fn aux_values(self, motors: [f64; 4], gyro: [f64; 3]) -> Option<Vec<f64>> {
        match self {
            Self::VisionMotor => Some(motors.to_vec()),
            Self::VisionGyro => Some(gyro.to_vec()),
            _ => None,
        }
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace(['-', '_', '+'], "").as_str() {
            "vision" => Self::Vision,
            "visionmotor" | "motor" => Self::VisionMotor,
            "visiongyro" | "gyro" => Self::VisionGyro,
            "visionff" | "ff" => Self::VisionFF,
            "visionsnn" | "snn" => Self::VisionSNN,
            _ => return Err(Error::Config(format!("unknown variant {s:?}"))),
        })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Vision => "vision",
            Self::VisionMotor => "vision-motor",
            Self::VisionGyro => "vision-gyro",
            Self::VisionFF => "vision-ff",
            Self::VisionSNN => "vision-snn",
        })
    }
}

/// Layer plan and input geometry of an estimator network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub variant: Variant,
    pub width: usize,
    pub height: usize,
    pub encoder_channels: [usize; 3],
    pub memory_channels: usize,
    pub decoder_channels: usize,
    pub aux_width: usize,
    pub aux_embed: usize,
    pub aux_hidden: usize,
    /// Multiplier applied to raw event counts.
    pub input_scale: f64,
    /// Multiplier applied to auxiliary inputs before the aux encoder.
    pub aux_scale: f64,
    pub lif_leak: f64,
    pub lif_threshold: f64,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(variant: Variant, width: usize, height: usize, seed: u64) -> Self {
        Self {
            variant,
            width,
            height,
            encoder_channels: [16, 32, 48],
            memory_channels: 96,
            decoder_channels: 16,
            aux_width: variant.aux_width(),
            aux_embed: 32,
            aux_hidden: 64,
            input_scale: 0.5,
            // Motor speeds arrive in rad/s (~10³); gyro rates in rad/s.
            aux_scale: if variant == Variant::VisionMotor { 1e-3 } else { 1.0 },
            lif_leak: 0.9,
            lif_threshold: 1.0,
            seed,
        }
    }

    /// Down-scaled plan for fast tests; same topology, narrow layers.
    pub fn tiny(variant: Variant, width: usize, height: usize, seed: u64) -> Self {
        Self {
            encoder_channels: [2, 3, 4],
            memory_channels: 4,
            decoder_channels: 3,
            aux_embed: 3,
            aux_hidden: 3,
            ..Self::new(variant, width, height, seed)
        }
    }

    pub fn feature_size(&self) -> (usize, usize) {
        (self.width / 8, self.height / 8)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.width % 8 != 0 || self.height % 8 != 0 {
            return Err(Error::Config(format!(
                "input {}x{} must be a non-zero multiple of 8 in both axes",
                self.width, self.height
            )));
        }
        if self.aux_width != self.variant.aux_width() {
            return Err(Error::Config(format!(
                "variant {} needs aux width {}, got {}",
                self.variant,
                self.variant.aux_width(),
                self.aux_width
            )));
        }
        let widths = [self.encoder_channels.as_slice(), &[self.memory_channels, self.decoder_channels]].concat();
        if widths.contains(&0) || (self.aux_width > 0 && (self.aux_embed == 0 || self.aux_hidden == 0)) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !(self.lif_leak > 0.0 && self.lif_leak < 1.0) {
            return Err(Error::Config(format!("LIF leak {} outside (0, 1)", self.lif_leak)));
        }
        if !(self.input_scale > 0.0 && self.aux_scale > 0.0) {
            return Err(Error::Config("input scales must be positive".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("variant", self.variant);
        kv.set("width", self.width);
        kv.set("height", self.height);
        kv.set("encoder_channels", self.encoder_channels.map(|c| c.to_string()).join(","));
        kv.set("memory_channels", self.memory_channels);
        kv.set("decoder_channels", self.decoder_channels);
        kv.set("aux_width", self.aux_width);
        kv.set("aux_embed", self.aux_embed);
        kv.set("aux_hidden", self.aux_hidden);
        kv.set("input_scale", self.input_scale);
        kv.set("aux_scale", self.aux_scale);
        kv.set("lif_leak", self.lif_leak);
        kv.set("lif_threshold", self.lif_threshold);
        kv.set("seed", self.seed);
        kv
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let variant: Variant = kv.require("variant")?;
        let d = Self::new(variant, kv.require("width")?, kv.require("height")?, kv.parse_or("seed", 0)?);
        let enc = match kv.list::<usize>("encoder_channels")? {
            Some(v) if v.len() == 3 => [v[0], v[1], v[2]],
            Some(v) => return Err(Error::Config(format!("encoder_channels needs 3 values, got {}", v.len()))),
            None => d.encoder_channels,
        };
        let c = Self {
            encoder_channels: enc,
            memory_channels: kv.parse_or("memory_channels", d.memory_channels)?,
            decoder_channels: kv.parse_or("decoder_channels", d.decoder_channels)?,
            aux_width: kv.parse_or("aux_width", d.aux_width)?,
            aux_embed: kv.parse_or("aux_embed", d.aux_embed)?,
            aux_hidden: kv.parse_or("aux_hidden", d.aux_hidden)?,
            input_scale: kv.parse_or("input_scale", d.input_scale)?,
            aux_scale: kv.parse_or("aux_scale", d.aux_scale)?,
            lif_leak: kv.parse_or("lif_leak", d.lif_leak)?,
            lif_threshold: kv.parse_or("lif_threshold", d.lif_threshold)?,
            ..d
        };
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(NetworkConfig::new(Variant::Vision, 320, 240, 0).validate().is_ok());
        assert!(NetworkConfig::new(Variant::Vision, 324, 240, 0).validate().is_err());
        let mut c = NetworkConfig::new(Variant::VisionGyro, 160, 120, 0);
        c.aux_width = 0;
        assert!(c.validate().is_err());
        let mut c = NetworkConfig::new(Variant::Vision, 160, 120, 0);
        c.aux_width = 4;
        assert!(c.validate().is_err());
    }

    #[test]
    fn kv_round_trip() {
        for v in Variant::ALL {
            let c = NetworkConfig::new(v, 160, 120, 42);
            assert_eq!(NetworkConfig::from_kv(&c.to_kv()).unwrap(), c);
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
    }
}
