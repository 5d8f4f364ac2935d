use std::collections::HashMap;

use noimu::eventcam::{
    accumulate_frames, generate_events, CameraModel, Event, EventConfig, MaskMode, PixelMask, Polarity, Pose,
    Projection, SceneTexture, TextureStyle, BIN_US,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const W: usize = 64;
const H: usize = 48;

fn camera() -> CameraModel {
    CameraModel::new(Projection::Equidistant, W, H, 140.0).unwrap()
}

/// Smooth sway over the ground at 1.2 m, sampled every `dt_us`.
fn sway(duration_us: u64, dt_us: u64, amp: f64) -> Vec<Pose> {
    (0..=duration_us / dt_us)
        .map(|k| {
            let t = (k * dt_us) as f64 * 1e-6;
            Pose {
                position: [0.4 * t, 0.2 * (3.0 * t).sin(), 1.2 + 0.05 * t],
                roll: amp * (5.0 * t).sin(),
                pitch: -0.7 * amp * (4.0 * t).cos(),
                yaw: 0.1 * t,
            }
        })
        .collect()
}

fn per_pixel(events: &[Event]) -> HashMap<(u16, u16), (i64, i64)> {
    let mut m: HashMap<(u16, u16), (i64, i64)> = HashMap::new();
    for e in events {
        let c = m.entry((e.x, e.y)).or_default();
        match e.polarity {
            Polarity::On => c.0 += 1,
            Polarity::Off => c.1 += 1,
        }
    }
    m
}

#[test]
fn every_crossing_is_accounted_for() {
    let scene = SceneTexture::procedural(TextureStyle::Mixed, 3);
    let cfg = EventConfig { refractory_us: 400, max_events_per_pixel_per_ms: 2, ..Default::default() };
    let mask = PixelMask::new(MaskMode::Full, W, H).unwrap();
    let poses = sway(200_000, 1000, 0.4);
    let s = generate_events(&poses, 1000, &camera(), &scene, &cfg, mask).unwrap();
    assert!(s.stats.refractory_suppressed > 0 && s.stats.overflow_dropped > 0, "{:?}", s.stats);
    let n_bins = (200_000 / BIN_US) as usize;
    let batch = accumulate_frames(&s.events, 0, n_bins, W, H, 3).unwrap();
    assert!(batch.saturated > 0);
    let counted: u64 = batch.frames.iter().map(|f| f.total()).sum();
    assert_eq!(batch.outside, 0);
    assert_eq!(
        counted + batch.saturated + s.stats.refractory_suppressed + s.stats.overflow_dropped,
        s.stats.raw_crossings
    );
    assert_eq!(s.stats.emitted as usize, s.events.len());
}

#[test]
fn frames_match_brute_force_histogram() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (w, h, n_bins, cap) = (12usize, 9usize, 20usize, 6u16);
    let mut events: Vec<Event> = (0..10_000)
        .map(|_| Event {
            t_us: rng.random_range(0..(n_bins as u64 + 2) * BIN_US + 3000),
            x: rng.random_range(0..w as u16),
            y: rng.random_range(0..h as u16),
            polarity: if rng.random_bool(0.5) { Polarity::On } else { Polarity::Off },
        })
        .collect();
    events.sort_by_key(|e| e.t_us);
    let start = 2000;
    let batch = accumulate_frames(&events, start, n_bins, w, h, cap).unwrap();

    let mut raw: HashMap<(usize, usize, u16, u16), u64> = HashMap::new();
    let mut outside = 0;
    for e in &events {
        let k = e.t_us.checked_sub(start).map(|d| (d / BIN_US) as usize);
        match k {
            Some(k) if k < n_bins => *raw.entry((k, e.polarity.channel(), e.x, e.y)).or_default() += 1,
            _ => outside += 1,
        }
    }
    let saturated: u64 = raw.values().map(|&c| c.saturating_sub(cap as u64)).sum();
    assert_eq!(batch.outside, outside);
    assert_eq!(batch.saturated, saturated);
    for (k, f) in batch.frames.iter().enumerate() {
        assert_eq!(f.t0_us, start + k as u64 * BIN_US);
        let mut total = 0;
        for c in 0..2 {
            for y in 0..h {
                for x in 0..w {
                    let want = raw.get(&(k, c, x as u16, y as u16)).copied().unwrap_or(0).min(cap as u64);
                    assert_eq!(f.get(c, x, y) as u64, want);
                    total += want;
                }
            }
        }
        assert_eq!(f.total(), total);
    }
}

#[test]
fn finer_rendering_changes_counts_by_at_most_one() {
    let scene = SceneTexture::procedural(TextureStyle::Mixed, 5);
    let cfg = EventConfig::default();
    let mask = PixelMask::new(MaskMode::Full, W, H).unwrap();
    let coarse = generate_events(&sway(100_000, 1000, 0.2), 1000, &camera(), &scene, &cfg, mask).unwrap();
    let fine = generate_events(&sway(100_000, 500, 0.2), 500, &camera(), &scene, &cfg, mask).unwrap();
    assert!(coarse.events.len() > 1000);
    let (a, b) = (per_pixel(&coarse.events), per_pixel(&fine.events));
    let mut worst_total = 0;
    for y in 0..H as u16 {
        for x in 0..W as u16 {
            let (on_a, off_a) = a.get(&(x, y)).copied().unwrap_or_default();
            let (on_b, off_b) = b.get(&(x, y)).copied().unwrap_or_default();
            assert!(((on_a - off_a) - (on_b - off_b)).abs() <= 1, "net count at ({x},{y})");
            worst_total = worst_total.max(((on_a + off_a) - (on_b + off_b)).abs());
        }
    }
    assert!(worst_total <= 1, "per-pixel total changed by {worst_total}");
}

#[test]
fn mirrored_world_mirrors_frames() {
    let scene = SceneTexture::procedural(TextureStyle::Mixed, 9);
    let cfg = EventConfig::default();
    let mask = PixelMask::new(MaskMode::Full, W, H).unwrap();
    let poses = sway(60_000, 1000, 0.3);
    let mirrored: Vec<Pose> = poses
        .iter()
        .map(|p| Pose {
            position: [p.position[0], -p.position[1], p.position[2]],
            roll: -p.roll,
            pitch: p.pitch,
            yaw: -p.yaw,
        })
        .collect();
    let a = generate_events(&poses, 1000, &camera(), &scene, &cfg, mask).unwrap();
    let b = generate_events(&mirrored, 1000, &camera(), &scene.mirrored(), &cfg, mask).unwrap();
    assert!(a.events.len() > 500);
    assert_eq!(a.stats, b.stats);
    let n = (60_000 / BIN_US) as usize;
    let fa = accumulate_frames(&a.events, 0, n, W, H, 255).unwrap();
    let fb = accumulate_frames(&b.events, 0, n, W, H, 255).unwrap();
    for (x, y) in fa.frames.iter().zip(&fb.frames) {
        assert!(x.mirrored_lr() == *y, "bin at {} us differs", x.t0_us);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn conservation_holds_for_any_scene(seed in 0u64..1000, refractory in 0u64..800, cap in 1u16..6) {
        let scene = SceneTexture::procedural(TextureStyle::Mixed, seed);
        let cfg = EventConfig { refractory_us: refractory, seed, ..Default::default() };
        let mask = PixelMask::new(MaskMode::Half, W, H).unwrap();
        let s = generate_events(&sway(30_000, 1000, 0.5), 1000, &camera(), &scene, &cfg, mask).unwrap();
        let b = accumulate_frames(&s.events, 0, 6, mask.width(), mask.height(), cap).unwrap();
        let counted: u64 = b.frames.iter().map(|f| f.total()).sum();
        prop_assert_eq!(
            counted + b.saturated + s.stats.refractory_suppressed + s.stats.overflow_dropped,
            s.stats.raw_crossings
        );
        prop_assert!(s.events.windows(2).all(|w| w[0].t_us <= w[1].t_us));
        prop_assert!(s.events.iter().all(|e| (e.x as usize) < mask.width() && (e.y as usize) < mask.height()));
    }
}
