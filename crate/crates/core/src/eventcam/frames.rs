use super::events::Event;
use super::mask::MaskMode;
use crate::error::{Error, Result};

/// Width of one accumulation bin.
pub const BIN_US: u64 = 5000;

/// Two-channel event counts over one bin: channel 0 holds ON events,
/// channel 1 OFF events, each row-major `height×width`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventFrame {
    pub width: usize,
    pub height: usize,
    pub t0_us: u64,
    pub counts: Vec<u16>,
}

impl EventFrame {
    pub fn zeros(width: usize, height: usize, t0_us: u64) -> Self {
        Self { width, height, t0_us, counts: vec![0; 2 * width * height] }
    }

    pub fn index(&self, channel: usize, x: usize, y: usize) -> usize {
        (channel * self.height + y) * self.width + x
    }

    pub fn get(&self, channel: usize, x: usize, y: usize) -> u16 {
        self.counts[self.index(channel, x, y)]
    }

    pub fn set(&mut self, channel: usize, x: usize, y: usize, v: u16) {
        let i = self.index(channel, x, y);
        self.counts[i] = v;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Reflection across the vertical image axis (`x → W−1−x`).
    pub fn mirrored_lr(&self) -> Self {
        self.remap(|x, y| (self.width - 1 - x, y), false)
    }

    /// Reflection across the horizontal image axis (`y → H−1−y`).
    pub fn mirrored_ud(&self) -> Self {
        self.remap(|x, y| (x, self.height - 1 - y), false)
    }

    /// ON and OFF channels exchanged.
    pub fn polarity_swapped(&self) -> Self {
        self.remap(|x, y| (x, y), true)
    }

    fn remap(&self, f: impl Fn(usize, usize) -> (usize, usize), swap: bool) -> Self {
        let mut out = Self::zeros(self.width, self.height, self.t0_us);
        for c in 0..2 {
            let dc = if swap { 1 - c } else { c };
            for y in 0..self.height {
                for x in 0..self.width {
                    let (nx, ny) = f(x, y);
                    out.set(dc, nx, ny, self.get(c, x, y));
                }
            }
        }
        out
    }
}

/// Frames plus the counters needed to reconcile them with the stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameBatch {
    pub frames: Vec<EventFrame>,
    /// Events not counted because their pixel had reached the cap.
    pub saturated: u64,
    /// Events before `t_start` or after the last bin.
    pub outside: u64,
}

/// Bins a time-sorted stream into `n_bins` consecutive 5 ms frames starting
/// at `t_start_us`.
pub fn accumulate_frames(
    events: &[Event],
    t_start_us: u64,
    n_bins: usize,
    width: usize,
    height: usize,
    cap: u16,
) -> Result<FrameBatch> {
    if let Some(i) = events.windows(2).position(|w| w[1].t_us < w[0].t_us) {
        return Err(Error::Domain(format!("events not time-sorted at index {}", i + 1)));
    }
    let mut frames: Vec<EventFrame> =
        (0..n_bins).map(|k| EventFrame::zeros(width, height, t_start_us + k as u64 * BIN_US)).collect();
    let (mut saturated, mut outside) = (0, 0);
    for e in events {
        if e.t_us < t_start_us {
            outside += 1;
            continue;
        }
        let k = ((e.t_us - t_start_us) / BIN_US) as usize;
        let (x, y) = (e.x as usize, e.y as usize);
        if k >= n_bins {
            outside += 1;
            continue;
        }
        if x >= width || y >= height {
            return Err(Error::Shape(format!("event at ({x}, {y}) outside {width}x{height} grid")));
        }
        let f = &mut frames[k];
        let i = f.index(e.polarity.channel(), x, y);
        if f.counts[i] >= cap {
            saturated += 1;
        } else {
            f.counts[i] += 1;
        }
    }
    Ok(FrameBatch { frames, saturated, outside })
}

/// Compacts frames to the enabled pixels of `mask`, then optionally takes a
/// centered `(width, height)` window of the result.
pub fn apply_mask_or_crop(frames: &[EventFrame], mask: MaskMode, crop: Option<(usize, usize)>) -> Result<Vec<EventFrame>> {
    frames
        .iter()
        .map(|f| {
            let s = mask.stride();
            if f.width % s != 0 || f.height % s != 0 {
                return Err(Error::Shape(format!("{}x{} frame not divisible by mask stride {s}", f.width, f.height)));
            }
            let (mw, mh) = (f.width / s, f.height / s);
            let (cw, ch) = crop.unwrap_or((mw, mh));
            if cw == 0 || ch == 0 || cw > mw || ch > mh {
                return Err(Error::Config(format!("crop {cw}x{ch} does not fit a {mw}x{mh} frame")));
            }
            let (x0, y0) = ((mw - cw) / 2, (mh - ch) / 2);
            let mut out = EventFrame::zeros(cw, ch, f.t0_us);
            for c in 0..2 {
                for y in 0..ch {
                    for x in 0..cw {
                        out.set(c, x, y, f.get(c, (x0 + x) * s, (y0 + y) * s));
                    }
                }
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventcam::Polarity;

    fn ev(t: u64, x: u16, y: u16, on: bool) -> Event {
        Event { t_us: t, x, y, polarity: if on { Polarity::On } else { Polarity::Off } }
    }

    #[test]
    fn empty_stream_gives_zero_frames() {
        let b = accumulate_frames(&[], 0, 3, 4, 4, 255).unwrap();
        assert_eq!(b.frames.len(), 3);
        assert!(b.frames.iter().all(|f| f.total() == 0));
        assert_eq!(b.frames[2].t0_us, 10_000);
    }

    #[test]
    fn bin_arithmetic() {
        let b = accumulate_frames(&[ev(7200, 2, 1, true)], 0, 3, 4, 4, 255).unwrap();
        assert_eq!(b.frames[1].get(0, 2, 1), 1);
        assert_eq!(b.frames[1].total(), 1);
    }

    #[test]
    fn unsorted_rejected_and_cap_counted() {
        assert!(accumulate_frames(&[ev(10, 0, 0, true), ev(5, 0, 0, true)], 0, 1, 1, 1, 255).is_err());
        let many: Vec<_> = (0..10).map(|t| ev(t, 0, 0, false)).collect();
        let b = accumulate_frames(&many, 0, 1, 1, 1, 4).unwrap();
        assert_eq!((b.frames[0].get(1, 0, 0), b.saturated), (4, 6));
    }

    #[test]
    fn masks_and_crops() {
        let mut f = EventFrame::zeros(8, 4, 0);
        for y in (0..4).step_by(2) {
            for x in (0..8).step_by(2) {
                f.set(0, x, y, (x + 10 * y) as u16 + 1);
            }
        }
        assert_eq!(apply_mask_or_crop(&[f.clone()], MaskMode::Full, None).unwrap()[0], f);
        let h = &apply_mask_or_crop(&[f.clone()], MaskMode::Half, None).unwrap()[0];
        assert_eq!((h.width, h.height, h.total()), (4, 2, f.total()));
        let c = &apply_mask_or_crop(&[f.clone()], MaskMode::Full, Some((4, 2))).unwrap()[0];
        for y in 0..2 {
            for x in 0..4 {
                assert_eq!(c.get(0, x, y), f.get(0, x + 2, y + 1));
            }
        }
        assert!(apply_mask_or_crop(&[f], MaskMode::Full, Some((10, 2))).is_err());
    }

    #[test]
    fn mirrors_are_involutions() {
        let mut f = EventFrame::zeros(5, 3, 0);
        f.set(1, 0, 2, 7);
        assert_eq!(f.mirrored_lr().get(1, 4, 2), 7);
        assert_eq!(f.mirrored_ud().get(1, 0, 0), 7);
        assert_eq!(f.polarity_swapped().get(0, 0, 2), 7);
        assert_eq!(f.mirrored_lr().mirrored_lr(), f);
    }
}
