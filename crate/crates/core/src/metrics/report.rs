use std::fmt::Write as _;

use super::{masd, rmse};
use crate::error::Result;
use crate::kv::KeyValues;

/// Channel names in output order; attitudes in degrees, rates in deg/s.
pub const CHANNELS: [&str; 4] = ["phi", "theta", "p", "q"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMetrics {
    pub rmse: f64,
    pub masd: f64,
}

/// Per-channel RMSE and MASD of one evaluated sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub label: String,
    pub frames: usize,
    pub channels: [ChannelMetrics; 4],
}

impl EvaluationReport {
    /// `pred` and `truth` hold `[φ, θ, p, q]` rows in reporting units.
    pub fn compute(label: impl Into<String>, pred: &[[f64; 4]], truth: &[[f64; 4]]) -> Result<Self> {
        let col = |rows: &[[f64; 4]], c: usize| rows.iter().map(|r| r[c]).collect::<Vec<_>>();
        let mut channels = [ChannelMetrics { rmse: 0.0, masd: 0.0 }; 4];
        for (c, slot) in channels.iter_mut().enumerate() {
            let (p, t) = (col(pred, c), col(truth, c));
            *slot = ChannelMetrics { rmse: rmse(&p, &t)?, masd: masd(&p)? };
        }
        Ok(Self { label: label.into(), frames: pred.len(), channels })
    }

    /// Mean over the two attitude channels.
    pub fn attitude_rmse(&self) -> f64 {
        0.5 * (self.channels[0].rmse + self.channels[1].rmse)
    }

    pub fn rate_rmse(&self) -> f64 {
        0.5 * (self.channels[2].rmse + self.channels[3].rmse)
    }

    pub fn attitude_masd(&self) -> f64 {
        0.5 * (self.channels[0].masd + self.channels[1].masd)
    }

    pub fn rate_masd(&self) -> f64 {
        0.5 * (self.channels[2].masd + self.channels[3].masd)
    }

    pub const CSV_HEADER: &'static str =
        "label,frames,rmse_phi_deg,rmse_theta_deg,rmse_p_deg_s,rmse_q_deg_s,masd_phi_deg,masd_theta_deg,masd_p_deg_s,masd_q_deg_s";

    pub fn csv_row(&self) -> String {
        let mut s = format!("{},{}", self.label, self.frames);
        for c in &self.channels {
            write!(s, ",{:.6}", c.rmse).expect("string write");
        }
        for c in &self.channels {
            write!(s, ",{:.6}", c.masd).expect("string write");
        }
        s
    }

    pub fn to_kv(&self, kv: &mut KeyValues, prefix: &str) {
        kv.set(&format!("{prefix}frames"), self.frames);
        for (name, c) in CHANNELS.iter().zip(&self.channels) {
            kv.set(&format!("{prefix}rmse_{name}"), format!("{:.6}", c.rmse));
            kv.set(&format!("{prefix}masd_{name}"), format!("{:.6}", c.masd));
        }
        kv.set(&format!("{prefix}attitude_rmse"), format!("{:.6}", self.attitude_rmse()));
        kv.set(&format!("{prefix}rate_rmse"), format!("{:.6}", self.rate_rmse()));
        kv.set(&format!("{prefix}attitude_masd"), format!("{:.6}", self.attitude_masd()));
        kv.set(&format!("{prefix}rate_masd"), format!("{:.6}", self.rate_masd()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_offset_rmse_equals_offset() {
        let truth: Vec<[f64; 4]> = (0..10).map(|i| [i as f64; 4]).collect();
        let pred: Vec<[f64; 4]> = truth.iter().map(|r| r.map(|v| v + 0.5)).collect();
        let r = EvaluationReport::compute("x", &pred, &truth).unwrap();
        assert!(r.channels.iter().all(|c| (c.rmse - 0.5).abs() < 1e-12 && (c.masd - 1.0).abs() < 1e-12));
        assert_eq!(r.csv_row().split(',').count(), EvaluationReport::CSV_HEADER.split(',').count());
    }
}
