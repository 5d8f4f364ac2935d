use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{DatasetSequence, LabelRow};
use crate::error::{Error, Result};
use crate::eventcam::EventFrame;

/// Start of a slice inside one of several sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceRef {
    pub sequence: usize,
    pub start: usize,
}

/// Consecutive frames with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub frames: Vec<EventFrame>,
    pub labels: Vec<LabelRow>,
}

impl Slice {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn load(sequences: &[DatasetSequence], r: SliceRef, len: usize) -> Result<Self> {
        let seq = sequences.get(r.sequence).ok_or_else(|| Error::Domain(format!("no sequence {}", r.sequence)))?;
        if r.start + len > seq.len() {
            return Err(Error::Domain(format!("slice {}..{} beyond sequence of {}", r.start, r.start + len, seq.len())));
        }
        let frames = (r.start..r.start + len).map(|k| seq.frame(k)).collect::<Result<_>>()?;
        Ok(Self { frames, labels: seq.labels[r.start..r.start + len].to_vec() })
    }
}

/// Draws `n` slice starts uniformly over every valid position of every
/// sequence, so longer sequences are picked proportionally more often.
pub fn sample_slices(lengths: &[usize], n: usize, slice_len: usize, seed: u64) -> Result<Vec<SliceRef>> {
    if slice_len == 0 {
        return Err(Error::Config("slice length must be positive".into()));
    }
    if let Some(i) = lengths.iter().position(|&l| l < slice_len) {
        return Err(Error::Config(format!(
            "sequence {i} has {} frames, fewer than the slice length {slice_len}",
            lengths[i]
        )));
    }
    let starts: Vec<usize> = lengths.iter().map(|&l| l - slice_len + 1).collect();
    let total: usize = starts.iter().sum();
    if total == 0 {
        return Err(Error::Config("no sequences to sample from".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let mut u = rng.random_range(0..total);
            let mut sequence = 0;
            while u >= starts[sequence] {
                u -= starts[sequence];
                sequence += 1;
            }
            SliceRef { sequence, start: u }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_length_has_one_slice() {
        let s = sample_slices(&[100], 5, 100, 3).unwrap();
        assert!(s.iter().all(|r| *r == SliceRef { sequence: 0, start: 0 }));
    }

    #[test]
    fn seeded_and_validated() {
        assert_eq!(sample_slices(&[300, 500], 20, 100, 9).unwrap(), sample_slices(&[300, 500], 20, 100, 9).unwrap());
        assert_ne!(sample_slices(&[300, 500], 20, 100, 9).unwrap(), sample_slices(&[300, 500], 20, 100, 10).unwrap());
        assert!(sample_slices(&[300, 99], 1, 100, 1).is_err());
        assert!(sample_slices(&[300], 1, 0, 1).is_err());
    }

    #[test]
    fn starts_are_uniform() {
        // Pearson χ² over 10 equal-width start bins, 10k draws, 9 dof:
        // the 0.999 quantile is 27.88.
        let draws = sample_slices(&[1099], 10_000, 100, 42).unwrap();
        let mut counts = [0f64; 10];
        for d in &draws {
            counts[d.start / 100] += 1.0;
        }
        let expected = 1000.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        assert!(chi2 < 27.88, "χ² = {chi2}");
    }
}
