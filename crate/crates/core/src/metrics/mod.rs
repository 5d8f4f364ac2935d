//! Evaluation metrics: RMSE, MASD, PCC time-shift delay and bias-subtracted
//! error histograms, plus report tables.

mod report;

pub use report::{ChannelMetrics, EvaluationReport, CHANNELS};

use crate::error::{Error, Result};

/// Attitude histogram bin width, degrees.
pub const ATTITUDE_BIN_DEG: f64 = 0.25;
/// Attitude histogram half range, degrees.
pub const ATTITUDE_RANGE_DEG: f64 = 3.0;
/// Rate histogram bin width, degrees per second.
pub const RATE_BIN_DEG_S: f64 = 1.5;
/// Rate histogram half range, degrees per second.
pub const RATE_RANGE_DEG_S: f64 = 18.0;

fn check_pair(pred: &[f64], truth: &[f64], min: usize) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!("series lengths {} and {} differ", pred.len(), truth.len())));
    }
    if pred.len() < min {
        return Err(Error::Domain(format!("need at least {min} samples, got {}", pred.len())));
    }
    if pred.iter().chain(truth).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite sample".into()));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 1)?;
    let s: f64 = pred.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((s / pred.len() as f64).sqrt())
}

/// Mean absolute successive difference.
pub fn masd(series: &[f64]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::Domain(format!("MASD needs at least 2 samples, got {}", series.len())));
    }
    let s: f64 = series.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    Ok(s / (series.len() - 1) as f64)
}

/// Pearson correlation coefficient.
pub fn pcc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 2)?;
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Domain("zero-variance series has no correlation".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayResult {
    /// Frames by which the prediction lags the truth.
    pub delay_frames: i64,
    pub peak_pcc: f64,
    /// `(shift, PCC)` for every shift in `[−max, max]`.
    pub curve: Vec<(i64, f64)>,
}

/// For each shift `k`, the PCC between `pred[t + k]` and `truth[t]` over the
/// overlap; the delay is the shift of highest PCC, ties going to the
/// smaller `|k|`.
pub fn pcc_shift_delay(pred: &[f64], truth: &[f64], max_shift: usize) -> Result<DelayResult> {
    check_pair(pred, truth, 2 * max_shift + 3)?;
    let n = pred.len() as i64;
    let m = max_shift as i64;
    let mut curve = Vec::with_capacity(2 * max_shift + 1);
    for k in -m..=m {
        let (p, t) = if k >= 0 {
            (&pred[k as usize..], &truth[..(n - k) as usize])
        } else {
            (&pred[..(n + k) as usize], &truth[(-k) as usize..])
        };
        curve.push((k, pcc(p, t)?));
    }
    let best = curve
        .iter()
        .copied()
        .reduce(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0.abs() < a.0.abs()) { b } else { a })
        .expect("non-empty curve");
    Ok(DelayResult { delay_frames: best.0, peak_pcc: best.1, curve })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    /// Bin `i` is centered on `(i − zero_bin)·bin_width`.
    pub counts: Vec<u64>,
    pub zero_bin: usize,
    pub underflow: u64,
    pub overflow: u64,
    pub sample_mean: f64,
    pub sample_std: f64,
}

impl Histogram {
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 - self.zero_bin as f64) * self.bin_width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// Fraction of samples with `|error| ≤ limit`, counting whole bins whose
    /// centers lie within the limit.
    pub fn fraction_within(&self, limit: f64) -> f64 {
        let inside: u64 =
            self.counts.iter().enumerate().filter(|(i, _)| self.center(*i).abs() <= limit + 1e-12).map(|(_, c)| c).sum();
        inside as f64 / self.total().max(1) as f64
    }
}

/// Histogram of `(ŷ − mean ŷ) − (y − mean y)` with zero-centered bins
/// spanning `±range` plus under/overflow counters.
pub fn bias_subtracted_histogram(pred: &[f64], truth: &[f64], bin_width: f64, range: f64) -> Result<Histogram> {
    check_pair(pred, truth, 2)?;
    if !(bin_width > 0.0 && range > 0.0) {
        return Err(Error::Domain("bin width and range must be positive".into()));
    }
    let errs = bias_subtracted_errors(pred, truth);
    let half = (range / bin_width).round() as usize;
    let mut h = Histogram {
        bin_width,
        counts: vec![0; 2 * half + 1],
        zero_bin: half,
        underflow: 0,
        overflow: 0,
        sample_mean: 0.0,
        sample_std: 0.0,
    };
    for &e in &errs {
        let k = (e / bin_width).round() as i64 + half as i64;
        if k < 0 {
            h.underflow += 1;
        } else if k as usize >= h.counts.len() {
            h.overflow += 1;
        } else {
            h.counts[k as usize] += 1;
        }
    }
    let n = errs.len() as f64;
    h.sample_mean = errs.iter().sum::<f64>() / n;
    h.sample_std = (errs.iter().map(|e| (e - h.sample_mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(h)
}

pub fn bias_subtracted_errors(pred: &[f64], truth: &[f64]) -> Vec<f64> {
    let n = pred.len() as f64;
    let (mp, mt) = (pred.iter().sum::<f64>() / n, truth.iter().sum::<f64>() / n);
    pred.iter().zip(truth).map(|(p, t)| (p - mp) - (t - mt)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_values() {
        assert_eq!(rmse(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[2.0, 3.0], &[2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(masd(&[0.0, 1.0, 3.0]).unwrap(), 1.5);
        assert!((masd(&[0.7, -0.7, 0.7, -0.7]).unwrap() - 1.4).abs() < 1e-12);
        assert!(rmse(&[], &[]).is_err());
        assert!(masd(&[1.0]).is_err());
    }

    #[test]
    fn shift_delay() {
        let y: Vec<f64> = (0..300).map(|i| (i as f64 * 0.07).sin() + 0.3 * (i as f64 * 0.31).cos()).collect();
        let mut delayed = vec![y[0]; 3];
        delayed.extend_from_slice(&y[..297]);
        assert_eq!(pcc_shift_delay(&delayed, &y, 10).unwrap().delay_frames, 3);
        let same = pcc_shift_delay(&y, &y, 10).unwrap();
        assert_eq!((same.delay_frames, same.peak_pcc), (0, 1.0));
        assert!(pcc_shift_delay(&vec![1.0; 300], &y, 10).is_err());
    }

    #[test]
    fn constant_offset_lands_in_zero_bin() {
        let y: Vec<f64> = (0..50).map(|i| (i as f64).sqrt()).collect();
        let p: Vec<f64> = y.iter().map(|v| v + 2.5).collect();
        let h = bias_subtracted_histogram(&p, &y, 0.25, 3.0).unwrap();
        assert_eq!(h.counts[h.zero_bin], 50);
        assert_eq!(h.counts.len(), 25);
        assert_eq!(h.fraction_within(0.0), 1.0);
    }
}
