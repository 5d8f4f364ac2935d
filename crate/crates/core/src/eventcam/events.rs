use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::camera::{CameraModel, Pose};
use super::mask::PixelMask;
use super::render::RayTable;
use super::texture::SceneTexture;
use crate::error::{Error, Result};
use crate::kv::KeyValues;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    On,
    Off,
}

impl Polarity {
    pub fn channel(self) -> usize {
        match self {
            Self::On => 0,
            Self::Off => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Self::On => Self::Off,
            Self::Off => Self::On,
        }
    }
}

/// One event on the compacted pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventConfig {
    /// Log-intensity contrast threshold, shared by ON and OFF.
    pub contrast: f64,
    /// Minimum gap between two emitted events of one pixel.
    pub refractory_us: u64,
    /// Standard deviation of the per-pixel threshold jitter; 0 disables it.
    pub jitter_sigma: f64,
    /// Background-activity rate per pixel; 0 disables it.
    pub noise_rate_hz: f64,
    pub max_events_per_pixel_per_ms: u32,
    pub seed: u64,
}

impl Default for EventConfig {
    fn default() -> Self {
        Self {
            contrast: 0.2,
            refractory_us: 0,
            jitter_sigma: 0.0,
            noise_rate_hz: 0.0,
            max_events_per_pixel_per_ms: 32,
            seed: 0,
        }
    }
}

impl EventConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.contrast > 0.0 && self.contrast.is_finite()) {
            return Err(Error::Config(format!("contrast threshold must be > 0, got {}", self.contrast)));
        }
        if !(self.jitter_sigma >= 0.0 && self.noise_rate_hz >= 0.0) {
            return Err(Error::Config("jitter and noise rate must be non-negative".into()));
        }
        if self.max_events_per_pixel_per_ms == 0 {
            return Err(Error::Config("per-pixel event cap must be positive".into()));
        }
        Ok(())
    }

    pub fn from_kv(kv: &KeyValues, seed: u64) -> Result<Self> {
        let d = Self::default();
        let c = Self {
            contrast: kv.parse_or("contrast", d.contrast)?,
            refractory_us: kv.parse_or("refractory_us", d.refractory_us)?,
            jitter_sigma: kv.parse_or("threshold_jitter", d.jitter_sigma)?,
            noise_rate_hz: kv.parse_or("noise_rate_hz", d.noise_rate_hz)?,
            max_events_per_pixel_per_ms: kv.parse_or("max_events_per_pixel_per_ms", d.max_events_per_pixel_per_ms)?,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        kv.set("contrast", self.contrast);
        kv.set("refractory_us", self.refractory_us);
        kv.set("threshold_jitter", self.jitter_sigma);
        kv.set("noise_rate_hz", self.noise_rate_hz);
        kv.set("max_events_per_pixel_per_ms", self.max_events_per_pixel_per_ms);
    }
}

/// Bookkeeping so that every threshold crossing is accounted for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EventStats {
    pub raw_crossings: u64,
    pub refractory_suppressed: u64,
    pub overflow_dropped: u64,
    pub noise_events: u64,
    pub emitted: u64,
}

impl EventStats {
    fn add(&mut self, o: &EventStats) {
        self.raw_crossings += o.raw_crossings;
        self.refractory_suppressed += o.refractory_suppressed;
        self.overflow_dropped += o.overflow_dropped;
        self.noise_events += o.noise_events;
        self.emitted += o.emitted;
    }
}

#[derive(Debug, Clone, Copy)]
struct PixelState {
    l_ref: f64,
    l_prev: f64,
    last_t: Option<u64>,
    thr_on: f64,
    thr_off: f64,
}

/// Streaming event generator over a fixed pixel grid.
#[derive(Debug, Clone)]
pub struct EventGenerator {
    width: usize,
    height: usize,
    config: EventConfig,
    pixels: Vec<PixelState>,
    t_prev_us: Option<u64>,
    noise_rng: ChaCha8Rng,
    pub stats: EventStats,
}

impl EventGenerator {
    pub fn new(width: usize, height: usize, config: EventConfig) -> Result<Self> {
        config.validate()?;
        if width > u16::MAX as usize + 1 || height > u16::MAX as usize + 1 {
            return Err(Error::Config("grid exceeds 16-bit coordinates".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let c = config.contrast;
        let jitter = Normal::new(0.0, config.jitter_sigma.max(1e-300)).expect("finite sigma");
        let draw = |rng: &mut ChaCha8Rng| {
            if config.jitter_sigma > 0.0 {
                (c + jitter.sample(rng)).max(0.01)
            } else {
                c
            }
        };
        let pixels = (0..width * height)
            .map(|_| {
                let thr_on = draw(&mut rng);
                let thr_off = draw(&mut rng);
                PixelState { l_ref: 0.0, l_prev: 0.0, last_t: None, thr_on, thr_off }
            })
            .collect();
        let noise_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
        Ok(Self { width, height, config, pixels, t_prev_us: None, noise_rng, stats: EventStats::default() })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Feeds the log-intensity field rendered at `t_us`. The first call only
    /// sets the reference levels. Events of the interval since the previous
    /// call are appended to `out` in time order.
    pub fn step(&mut self, field: &[f64], t_us: u64, out: &mut Vec<Event>) -> Result<()> {
        if field.len() != self.pixels.len() {
            return Err(Error::Shape(format!("field has {} pixels, grid has {}", field.len(), self.pixels.len())));
        }
        let Some(t0) = self.t_prev_us else {
            for (p, &l) in self.pixels.iter_mut().zip(field) {
                p.l_ref = l;
                p.l_prev = l;
            }
            self.t_prev_us = Some(t_us);
            return Ok(());
        };
        if t_us <= t0 {
            return Err(Error::Domain(format!("render time {t_us} us not after {t0} us")));
        }
        let span = t_us - t0;
        let cap = (self.config.max_events_per_pixel_per_ms as u64 * span).div_ceil(1000);
        let refractory = self.config.refractory_us;
        let w = self.width;
        let rows: Vec<(Vec<Event>, EventStats)> = self
            .pixels
            .par_chunks_mut(w)
            .zip(field.par_chunks(w))
            .enumerate()
            .map(|(y, (states, vals))| {
                let mut ev = Vec::new();
                let mut st = EventStats::default();
                for (x, (p, &l1)) in states.iter_mut().zip(vals).enumerate() {
                    cross_pixel(p, l1, t0, span, cap, refractory, x as u16, y as u16, &mut ev, &mut st);
                }
                (ev, st)
            })
            .collect();
        let start = out.len();
        for (ev, st) in rows {
            out.extend(ev);
            self.stats.add(&st);
        }
        if self.config.noise_rate_hz > 0.0 {
            let p = (self.config.noise_rate_hz * span as f64 * 1e-6).min(1.0);
            for i in 0..self.pixels.len() {
                if self.noise_rng.random::<f64>() < p {
                    let t = t0 + self.noise_rng.random_range(0..span);
                    let pol = if self.noise_rng.random::<bool>() { Polarity::On } else { Polarity::Off };
                    out.push(Event { t_us: t, x: (i % w) as u16, y: (i / w) as u16, polarity: pol });
                    self.stats.noise_events += 1;
                    self.stats.emitted += 1;
                }
            }
        }
        out[start..].sort_by_key(|e| e.t_us);
        self.t_prev_us = Some(t_us);
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn cross_pixel(
    p: &mut PixelState,
    l1: f64,
    t0: u64,
    span: u64,
    cap: u64,
    refractory: u64,
    x: u16,
    y: u16,
    out: &mut Vec<Event>,
    st: &mut EventStats,
) {
    let l0 = p.l_prev;
    let dl = l1 - l0;
    let mut emitted_here = 0u64;
    loop {
        let (level, pol) = if l1 - p.l_ref >= p.thr_on {
            (p.l_ref + p.thr_on, Polarity::On)
        } else if p.l_ref - l1 >= p.thr_off {
            (p.l_ref - p.thr_off, Polarity::Off)
        } else {
            break;
        };
        p.l_ref = level;
        st.raw_crossings += 1;
        let alpha = if dl != 0.0 { ((level - l0) / dl).clamp(0.0, 1.0) } else { 1.0 };
        let t = t0 + (alpha * span as f64).floor() as u64;
        if matches!(p.last_t, Some(last) if t.saturating_sub(last) < refractory) {
            st.refractory_suppressed += 1;
            continue;
        }
        if emitted_here >= cap {
            st.overflow_dropped += 1;
            continue;
        }
        emitted_here += 1;
        p.last_t = Some(t);
        st.emitted += 1;
        out.push(Event { t_us: t, x, y, polarity: pol });
    }
    p.l_prev = l1;
}

/// Result of running the generator over a whole trajectory.
#[derive(Debug, Clone, Default)]
pub struct EventStream {
    pub width: usize,
    pub height: usize,
    pub events: Vec<Event>,
    pub stats: EventStats,
}

/// Renders every pose (the k-th at `k·dt_us`) and collects the events.
pub fn generate_events(
    poses: &[Pose],
    dt_us: u64,
    camera: &CameraModel,
    scene: &SceneTexture,
    config: &EventConfig,
    mask: PixelMask,
) -> Result<EventStream> {
    if dt_us == 0 {
        return Err(Error::Domain("render interval must be positive".into()));
    }
    let table = RayTable::new(camera, mask);
    let mut gen = EventGenerator::new(mask.width(), mask.height(), config.clone())?;
    let mut field = vec![0.0; table.len()];
    let mut events = Vec::new();
    for (k, pose) in poses.iter().enumerate() {
        table.render(pose, scene, &mut field);
        gen.step(&field, k as u64 * dt_us, &mut events)?;
    }
    Ok(EventStream { width: mask.width(), height: mask.height(), events, stats: gen.stats })
}
