use super::camera::{CameraModel, Pose};
use super::events::{Event, EventConfig, EventGenerator, EventStats};
use super::frames::{accumulate_frames, apply_mask_or_crop, EventFrame, BIN_US};
use super::mask::{MaskMode, PixelMask};
use super::render::RayTable;
use super::texture::{SceneTexture, TextureStyle};
use crate::error::{Error, Result};
use crate::kv::KeyValues;

/// Per-pixel, per-channel count limit of a frame.
pub const DEFAULT_FRAME_CAP: u16 = 255;

/// Everything needed to turn poses into network-ready frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSetup {
    pub camera: CameraModel,
    pub texture: TextureStyle,
    pub texture_seed: u64,
    pub events: EventConfig,
    pub mask: MaskMode,
    /// Centered window taken after masking.
    pub crop: Option<(usize, usize)>,
    pub frame_cap: u16,
}

impl Default for SensorSetup {
    fn default() -> Self {
        Self {
            camera: CameraModel::default(),
            texture: TextureStyle::Mixed,
            texture_seed: 0,
            events: EventConfig::default(),
            mask: MaskMode::Half,
            crop: None,
            frame_cap: DEFAULT_FRAME_CAP,
        }
    }
}

fn parse_crop(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("crop {s:?} must look like 160x120"));
    let (w, h) = s.split_once('x').ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

impl SensorSetup {
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let texture_seed = kv.parse_or("texture_seed", d.texture_seed)?;
        let s = Self {
            camera: CameraModel::from_kv(kv)?,
            texture: kv.parse_or("texture", d.texture)?,
            texture_seed,
            events: EventConfig::from_kv(kv, kv.parse_or("event_seed", texture_seed)?)?,
            mask: kv.parse_or("mask", d.mask)?,
            crop: kv.get("crop").filter(|c| *c != "none").map(parse_crop).transpose()?,
            frame_cap: kv.parse_or("frame_cap", d.frame_cap)?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        self.camera.write_kv(kv);
        kv.set("texture", self.texture);
        kv.set("texture_seed", self.texture_seed);
        self.events.write_kv(kv);
        kv.set("event_seed", self.events.seed);
        kv.set("mask", self.mask);
        kv.set("crop", self.crop.map_or("none".to_string(), |(w, h)| format!("{w}x{h}")));
        kv.set("frame_cap", self.frame_cap);
    }

    pub fn validate(&self) -> Result<()> {
        self.events.validate()?;
        PixelMask::new(self.mask, self.camera.width, self.camera.height)?;
        let (mw, mh) = self.masked_size();
        if let Some((w, h)) = self.crop {
            if w > mw || h > mh {
                return Err(Error::Config(format!("crop {w}x{h} larger than the {mw}x{mh} masked frame")));
            }
        }
        if self.frame_cap == 0 {
            return Err(Error::Config("frame cap must be positive".into()));
        }
        Ok(())
    }

    fn masked_size(&self) -> (usize, usize) {
        let s = self.mask.stride();
        (self.camera.width / s, self.camera.height / s)
    }

    /// Size of the frames handed to the estimator.
    pub fn frame_size(&self) -> (usize, usize) {
        self.crop.unwrap_or_else(|| self.masked_size())
    }

    pub fn scene(&self) -> SceneTexture {
        SceneTexture::procedural(self.texture, self.texture_seed)
    }
}

/// Renders poses as they happen and cuts the resulting events into frames.
#[derive(Debug)]
pub struct OnlineCamera {
    setup: SensorSetup,
    scene: SceneTexture,
    table: RayTable,
    generator: EventGenerator,
    field: Vec<f64>,
    pending: Vec<Event>,
    /// Frame counts dropped because a pixel hit the cap.
    pub saturated: u64,
}

impl OnlineCamera {
    pub fn new(setup: SensorSetup) -> Result<Self> {
        setup.validate()?;
        let mask = PixelMask::new(setup.mask, setup.camera.width, setup.camera.height)?;
        let table = RayTable::new(&setup.camera, mask);
        let generator = EventGenerator::new(mask.width(), mask.height(), setup.events.clone())?;
        let scene = setup.scene();
        Ok(Self { field: vec![0.0; table.len()], table, generator, scene, setup, pending: Vec::new(), saturated: 0 })
    }

    pub fn setup(&self) -> &SensorSetup {
        &self.setup
    }

    pub fn stats(&self) -> EventStats {
        self.generator.stats
    }

    /// Renders `pose` at `t_us`; times must increase between calls.
    pub fn observe(&mut self, pose: &Pose, t_us: u64) -> Result<()> {
        self.table.render(pose, &self.scene, &mut self.field);
        self.generator.step(&self.field, t_us, &mut self.pending)
    }

    /// Bins the events of `[t0_us, t0_us + BIN_US)` into a frame; earlier
    /// pending events are discarded.
    pub fn take_frame(&mut self, t0_us: u64) -> Result<EventFrame> {
        let end = t0_us + BIN_US;
        let split = self.pending.partition_point(|e| e.t_us < end);
        let (w, h) = (self.generator.width(), self.generator.height());
        let batch = accumulate_frames(&self.pending[..split], t0_us, 1, w, h, self.setup.frame_cap)?;
        self.pending.drain(..split);
        self.saturated += batch.saturated;
        let frames = apply_mask_or_crop(&batch.frames, MaskMode::Full, self.setup.crop)?;
        Ok(frames.into_iter().next().expect("one bin requested"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let s = SensorSetup { crop: Some((160, 120)), texture_seed: 9, ..Default::default() };
        let mut kv = KeyValues::new();
        s.write_kv(&mut kv);
        assert_eq!(SensorSetup::from_kv(&kv).unwrap(), s);
        assert_eq!(s.frame_size(), (160, 120));
        assert_eq!(SensorSetup::default().frame_size(), (320, 240));
    }

    #[test]
    fn oversized_crop_rejected() {
        let s = SensorSetup { crop: Some((400, 120)), ..Default::default() };
        assert!(s.validate().is_err());
    }

    #[test]
    fn moving_camera_fills_frames() {
        let setup = SensorSetup {
            camera: CameraModel::new(crate::eventcam::Projection::Equidistant, 64, 48, 140.0).unwrap(),
            mask: MaskMode::Full,
            ..Default::default()
        };
        let mut cam = OnlineCamera::new(setup).unwrap();
        let mut total = 0;
        for k in 0..=10u64 {
            let pose = Pose { position: [0.02 * k as f64, 0.0, 1.0], ..Default::default() };
            cam.observe(&pose, k * 1000).unwrap();
            if k % 5 == 0 && k > 0 {
                let f = cam.take_frame((k - 5) * 1000).unwrap();
                assert_eq!((f.width, f.height), (64, 48));
                total += f.total();
            }
        }
        assert!(total > 0);
        assert_eq!(total + cam.saturated, cam.stats().emitted);
    }
}
