use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MIN_INTENSITY: f64 = 0.05;
pub const MAX_INTENSITY: f64 = 1.0;

/// Procedural ground texture families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextureStyle {
    Blobs,
    Stripes,
    Mixed,
    /// Low-contrast clutter crossed by long straight high-contrast borders.
    Horizonful,
    /// Smooth isotropic blobs only.
    Horizonless,
}

impl TextureStyle {
    pub const ALL: [TextureStyle; 5] =
        [Self::Blobs, Self::Stripes, Self::Mixed, Self::Horizonful, Self::Horizonless];
}

impl FromStr for TextureStyle {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "blobs" => Self::Blobs,
            "stripes" => Self::Stripes,
            "mixed" => Self::Mixed,
            "horizonful" => Self::Horizonful,
            "horizonless" => Self::Horizonless,
            _ => return Err(Error::Config(format!("unknown texture style {s:?}"))),
        })
    }
}

impl fmt::Display for TextureStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Blobs => "blobs",
            Self::Stripes => "stripes",
            Self::Mixed => "mixed",
            Self::Horizonful => "horizonful",
            Self::Horizonless => "horizonless",
        })
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Uniform(f64),
    /// `0.5 + 0.4·sin(2π(x cos a + y sin a)/λ)`.
    Sinusoid { period: f64, angle: f64 },
    /// `0.5 + 0.4·cos(2π·r/λ)` around the origin.
    Rings { period: f64 },
    /// Periodic raster, bilinearly sampled.
    Raster { n: usize, cell: f64, data: Arc<Vec<f32>> },
}

/// Gray-level field over the ground plane with intensity in `[0.05, 1]`.
#[derive(Debug, Clone)]
pub struct SceneTexture {
    kind: Kind,
    mirror: bool,
}

const RASTER_SIZE: usize = 1024;
const RASTER_CELL_M: f64 = 0.0125;

impl SceneTexture {
    pub fn uniform(value: f64) -> Result<Self> {
        if !(MIN_INTENSITY..=MAX_INTENSITY).contains(&value) {
            return Err(Error::Domain(format!("intensity {value} outside [0.05, 1]")));
        }
        Ok(Self { kind: Kind::Uniform(value), mirror: false })
    }

    pub fn sinusoid(period: f64, angle: f64) -> Self {
        Self { kind: Kind::Sinusoid { period, angle }, mirror: false }
    }

    pub fn rings(period: f64) -> Self {
        Self { kind: Kind::Rings { period }, mirror: false }
    }

    /// Seeded procedural raster of the given style, periodic with a 12.8 m
    /// tile.
    pub fn procedural(style: TextureStyle, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e47_u64.rotate_left(40));
        let n = RASTER_SIZE;
        let mut f = vec![0.0f64; n * n];
        match style {
            TextureStyle::Blobs => add_blobs(&mut f, n, &mut rng, 700, 0.03, 0.30, 1.0),
            TextureStyle::Horizonless => add_blobs(&mut f, n, &mut rng, 160, 0.15, 0.70, 1.0),
            TextureStyle::Stripes => add_stripes(&mut f, n, &mut rng, 4, 1.0),
            TextureStyle::Mixed => {
                add_blobs(&mut f, n, &mut rng, 400, 0.03, 0.30, 1.0);
                normalize(&mut f);
                let mut g = vec![0.0; n * n];
                add_stripes(&mut g, n, &mut rng, 3, 1.0);
                normalize(&mut g);
                f.iter_mut().zip(&g).for_each(|(a, b)| *a = 0.5 * *a + 0.5 * b);
            }
            TextureStyle::Horizonful => {
                add_blobs(&mut f, n, &mut rng, 300, 0.05, 0.40, 1.0);
                normalize(&mut f);
                f.iter_mut().for_each(|v| *v = 0.35 + 0.3 * *v);
                add_borders(&mut f, n, &mut rng);
            }
        }
        normalize(&mut f);
        let data = f.iter().map(|&v| (MIN_INTENSITY + (MAX_INTENSITY - MIN_INTENSITY) * v) as f32).collect();
        Self { kind: Kind::Raster { n, cell: RASTER_CELL_M, data: Arc::new(data) }, mirror: false }
    }

    /// The same texture reflected across the north axis (`y → −y`).
    pub fn mirrored(&self) -> Self {
        Self { kind: self.kind.clone(), mirror: !self.mirror }
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirror
    }

    /// Intensity at ground point `(x, y)` in metres.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let y = if self.mirror { -y } else { y };
        match &self.kind {
            Kind::Uniform(v) => *v,
            Kind::Sinusoid { period, angle } => {
                0.5 + 0.4 * (TAU * (x * angle.cos() + y * angle.sin()) / period).sin()
            }
            Kind::Rings { period } => 0.5 + 0.4 * (TAU * x.hypot(y) / period).cos(),
            Kind::Raster { n, cell, data } => bilinear(data, *n, x / cell, y / cell),
        }
    }
}

fn bilinear(data: &[f32], n: usize, u: f64, v: f64) -> f64 {
    let (fu, fv) = (u.floor(), v.floor());
    let (au, av) = (u - fu, v - fv);
    let nn = n as i64;
    let i0 = (fu as i64).rem_euclid(nn) as usize;
    let j0 = (fv as i64).rem_euclid(nn) as usize;
    let i1 = (i0 + 1) % n;
    let j1 = (j0 + 1) % n;
    let at = |i: usize, j: usize| data[j * n + i] as f64;
    let top = at(i0, j0) * (1.0 - au) + at(i1, j0) * au;
    let bot = at(i0, j1) * (1.0 - au) + at(i1, j1) * au;
    top * (1.0 - av) + bot * av
}

fn normalize(f: &mut [f64]) {
    let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = (hi - lo).max(1e-12);
    f.iter_mut().for_each(|v| *v = (*v - lo) / span);
}

#[allow(clippy::too_many_arguments)]
fn add_blobs(f: &mut [f64], n: usize, rng: &mut ChaCha8Rng, count: usize, s_min: f64, s_max: f64, amp: f64) {
    for _ in 0..count {
        let cx = rng.random::<f64>() * n as f64;
        let cy = rng.random::<f64>() * n as f64;
        let sigma = (s_min + (s_max - s_min) * rng.random::<f64>()) / RASTER_CELL_M;
        let a = amp * if rng.random::<bool>() { 1.0 } else { -1.0 } * (0.3 + 0.7 * rng.random::<f64>());
        let reach = (3.0 * sigma).ceil() as i64;
        let inv = 1.0 / (2.0 * sigma * sigma);
        for dj in -reach..=reach {
            let y = (cy.floor() as i64 + dj).rem_euclid(n as i64) as usize;
            let ddy = cy.floor() + dj as f64 + 0.5 - cy;
            for di in -reach..=reach {
                let x = (cx.floor() as i64 + di).rem_euclid(n as i64) as usize;
                let ddx = cx.floor() + di as f64 + 0.5 - cx;
                f[y * n + x] += a * (-(ddx * ddx + ddy * ddy) * inv).exp();
            }
        }
    }
}

/// Soft-edged stripe sets along lattice directions so they tile seamlessly.
fn add_stripes(f: &mut [f64], n: usize, rng: &mut ChaCha8Rng, sets: usize, amp: f64) {
    for _ in 0..sets {
        let (a, b) = loop {
            let a = rng.random_range(-12i64..=12);
            let b = rng.random_range(-12i64..=12);
            if a != 0 || b != 0 {
                break (a as f64, b as f64);
            }
        };
        let phase = rng.random::<f64>() * TAU;
        let sharp = 2.0 + 6.0 * rng.random::<f64>();
        let w = amp * (0.4 + 0.6 * rng.random::<f64>());
        for j in 0..n {
            for i in 0..n {
                let s = (TAU * (a * i as f64 + b * j as f64) / n as f64 + phase).sin();
                f[j * n + i] += w * (sharp * s).tanh();
            }
        }
    }
}

/// Long straight dark and bright bands plus a few large rectangles.
fn add_borders(f: &mut [f64], n: usize, rng: &mut ChaCha8Rng) {
    let dirs = [(1i64, 0i64), (0, 1), (1, 1), (1, -1)];
    for _ in 0..8 {
        let (a, b) = dirs[rng.random_range(0..dirs.len())];
        let offset = rng.random::<f64>() * n as f64;
        let width = (0.04 + 0.08 * rng.random::<f64>()) / RASTER_CELL_M;
        let value = if rng.random::<bool>() { 0.0 } else { 1.0 };
        let norm = ((a * a + b * b) as f64).sqrt();
        for j in 0..n {
            for i in 0..n {
                // Signed distance along the normal, on the torus.
                let s = (a * i as i64 + b * j as i64) as f64 / norm;
                let d = (s - offset / norm).rem_euclid(n as f64 / norm);
                if d < width {
                    f[j * n + i] = value;
                }
            }
        }
    }
    for _ in 0..4 {
        let x0 = rng.random_range(0..n);
        let y0 = rng.random_range(0..n);
        let w = rng.random_range(n / 12..n / 5);
        let h = rng.random_range(n / 12..n / 5);
        let value = if rng.random::<bool>() { 0.05 } else { 0.95 };
        for j in 0..h {
            for i in 0..w {
                f[((y0 + j) % n) * n + (x0 + i) % n] = value;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn procedural_styles_are_bounded_and_deterministic() {
        for style in TextureStyle::ALL {
            let a = SceneTexture::procedural(style, 3);
            let b = SceneTexture::procedural(style, 3);
            let c = SceneTexture::procedural(style, 4);
            let mut differs = false;
            for k in 0..500 {
                let (x, y) = (k as f64 * 0.037 - 7.0, k as f64 * 0.051 - 9.0);
                let v = a.sample(x, y);
                assert!((MIN_INTENSITY - 1e-6..=MAX_INTENSITY + 1e-6).contains(&v), "{style}: {v}");
                assert_eq!(v, b.sample(x, y));
                differs |= v != c.sample(x, y);
            }
            assert!(differs, "{style} ignores its seed");
        }
    }

    #[test]
    fn raster_is_periodic() {
        let t = SceneTexture::procedural(TextureStyle::Blobs, 1);
        let period = RASTER_SIZE as f64 * RASTER_CELL_M;
        for &(x, y) in &[(0.3, 0.7), (5.1, -2.2)] {
            assert!((t.sample(x, y) - t.sample(x + period, y - period)).abs() < 1e-9);
        }
    }

    #[test]
    fn mirror_reflects_y() {
        let t = SceneTexture::procedural(TextureStyle::Stripes, 8);
        let m = t.mirrored();
        assert_eq!(t.sample(1.3, 0.4), m.sample(1.3, -0.4));
    }

    #[test]
    fn uniform_range_checked() {
        assert!(SceneTexture::uniform(0.0).is_err());
        assert_eq!(SceneTexture::uniform(0.3).unwrap().sample(4.0, 5.0), 0.3);
    }

    #[test]
    fn style_names_round_trip() {
        for s in TextureStyle::ALL {
            assert_eq!(s.to_string().parse::<TextureStyle>().unwrap(), s);
        }
    }
}
