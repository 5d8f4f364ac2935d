use rand::Rng;

use super::dataset::LabelRow;
use super::slices::Slice;

/// Which flips may be drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentFlags {
    pub polarity: bool,
    pub left_right: bool,
    pub up_down: bool,
}

impl Default for AugmentFlags {
    fn default() -> Self {
        Self { polarity: true, left_right: true, up_down: true }
    }
}

impl AugmentFlags {
    pub const NONE: Self = Self { polarity: false, left_right: false, up_down: false };

    /// Each enabled flip with probability one half.
    pub fn draw(&self, rng: &mut impl Rng) -> Flips {
        Flips {
            polarity: self.polarity && rng.random_bool(0.5),
            left_right: self.left_right && rng.random_bool(0.5),
            up_down: self.up_down && rng.random_bool(0.5),
        }
    }
}

/// The flips applied to one slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flips {
    pub polarity: bool,
    pub left_right: bool,
    pub up_down: bool,
}

/// Mirroring the image width mirrors the body `y` axis: roll, roll rate and
/// yaw rate change sign and the left and right rotors trade places.
pub fn mirror_label_lr(l: &LabelRow) -> LabelRow {
    let [phi, theta, p, q] = l.target;
    LabelRow {
        t_us: l.t_us,
        target: [-phi, theta, -p, q],
        motors: l.motors.map(|m| [m[2], m[3], m[0], m[1]]),
        gyro: l.gyro.map(|g| [-g[0], g[1], -g[2]]),
    }
}

/// Mirroring the image height mirrors the body `x` axis: pitch, pitch rate
/// and yaw rate change sign and the front and back rotors trade places.
pub fn mirror_label_ud(l: &LabelRow) -> LabelRow {
    let [phi, theta, p, q] = l.target;
    LabelRow {
        t_us: l.t_us,
        target: [phi, -theta, p, -q],
        motors: l.motors.map(|m| [m[3], m[2], m[1], m[0]]),
        gyro: l.gyro.map(|g| [g[0], -g[1], -g[2]]),
    }
}

pub fn augment(slice: &Slice, flips: Flips) -> Slice {
    let mut out = slice.clone();
    if flips.polarity {
        out.frames = out.frames.iter().map(|f| f.polarity_swapped()).collect();
    }
    if flips.left_right {
        out.frames = out.frames.iter().map(|f| f.mirrored_lr()).collect();
        out.labels = out.labels.iter().map(mirror_label_lr).collect();
    }
    if flips.up_down {
        out.frames = out.frames.iter().map(|f| f.mirrored_ud()).collect();
        out.labels = out.labels.iter().map(mirror_label_ud).collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventcam::EventFrame;

    fn slice() -> Slice {
        let mut f = EventFrame::zeros(4, 3, 0);
        f.set(0, 0, 0, 2);
        f.set(1, 3, 1, 5);
        let l = LabelRow {
            t_us: 5000,
            target: [0.1, -0.2, 0.3, -0.4],
            motors: Some([1.0, 2.0, 3.0, 4.0]),
            gyro: Some([0.3, -0.4, 0.05]),
        };
        Slice { frames: vec![f], labels: vec![l] }
    }

    #[test]
    fn every_flip_is_an_involution() {
        let s = slice();
        for flips in [
            Flips { polarity: true, ..Default::default() },
            Flips { left_right: true, ..Default::default() },
            Flips { up_down: true, ..Default::default() },
            Flips { polarity: true, left_right: true, up_down: true },
        ] {
            assert_eq!(augment(&augment(&s, flips), flips), s);
        }
    }

    #[test]
    fn polarity_keeps_labels_bit_identical() {
        let s = slice();
        let a = augment(&s, Flips { polarity: true, ..Default::default() });
        assert_eq!(a.labels, s.labels);
        assert_eq!(a.frames[0].get(1, 0, 0), 2);
    }

    #[test]
    fn left_right_negates_roll_only() {
        let a = augment(&slice(), Flips { left_right: true, ..Default::default() });
        assert_eq!(a.labels[0].target, [-0.1, -0.2, -0.3, -0.4]);
        assert_eq!(a.labels[0].gyro, Some([-0.3, -0.4, -0.05]));
        assert_eq!(a.frames[0].get(0, 3, 0), 2);
        let b = augment(&slice(), Flips { up_down: true, ..Default::default() });
        assert_eq!(b.labels[0].target, [0.1, 0.2, 0.3, 0.4]);
        assert_eq!(b.frames[0].get(0, 0, 2), 2);
    }
}
