use std::path::{Path, PathBuf};

use noimu::estimator::Variant;
use noimu::eventcam::MaskMode;
use noimu::kv::KeyValues;
use noimu::{Error, Result};

use crate::GlobalArgs;

/// Prefix of manifest keys that describe a run rather than configure it.
pub const RUN_PREFIX: &str = "run.";

/// Configuration file merged with the command-line overrides.
#[derive(Debug, Clone)]
pub struct Settings {
    pub kv: KeyValues,
    pub out: Option<PathBuf>,
}

impl Settings {
    pub fn resolve(args: &GlobalArgs) -> Result<Self> {
        let mut kv = KeyValues::new();
        if let Some(path) = &args.config {
            for (k, v) in KeyValues::load(path)?.iter() {
                if !k.starts_with(RUN_PREFIX) {
                    kv.set(k, v);
                }
            }
        }
        if let Some(seed) = args.seed {
            kv.set("seed", seed);
        }
        if let Some(mask) = &args.mask {
            kv.set("mask", mask.parse::<MaskMode>()?);
        }
        if let Some(crop) = &args.crop {
            parse_crop(crop)?;
            kv.set("crop", crop);
        }
        if let Some(variant) = &args.variant {
            kv.set("variant", variant.parse::<Variant>()?);
        }
        Ok(Self { kv, out: args.out.clone() })
    }

    pub fn out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| Error::Config("--out <dir> is required".into()))
    }

    pub fn seed(&self) -> Result<u64> {
        self.kv.parse_or("seed", 1)
    }

    /// Crop requested through the config or `--crop`; `Some(None)` means an
    /// explicit `none`.
    pub fn crop(&self) -> Result<Option<Option<(usize, usize)>>> {
        self.kv.get("crop").map(parse_crop).transpose()
    }
}

pub fn parse_crop(s: &str) -> Result<Option<(usize, usize)>> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let bad = || Error::Config(format!("crop {s:?} is not of the form WxH"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let (w, h): (usize, usize) = (w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?);
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok(Some((w, h)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> GlobalArgs {
        GlobalArgs { config: None, seed: None, out: None, threads: None, mask: None, crop: None, variant: None }
    }

    #[test]
    fn crop_syntax() {
        assert_eq!(parse_crop("160x120").unwrap(), Some((160, 120)));
        assert_eq!(parse_crop("none").unwrap(), None);
        assert!(parse_crop("160").is_err());
        assert!(parse_crop("0x5").is_err());
    }

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, "seed = 4\nmask = full\nrun.command = train\n").unwrap();
        let a = GlobalArgs { config: Some(path), seed: Some(9), variant: Some("gyro".into()), ..args() };
        let s = Settings::resolve(&a).unwrap();
        assert_eq!(s.seed().unwrap(), 9);
        assert_eq!(s.kv.get("mask"), Some("full"));
        assert_eq!(s.kv.get("variant"), Some("vision-gyro"));
        assert!(!s.kv.contains("run.command"));
        assert!(Settings::resolve(&GlobalArgs { mask: Some("eighth".into()), ..args() }).is_err());
    }
}
