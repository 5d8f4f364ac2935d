use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use noimu::estimator::EstimatorNetwork;
use noimu::metrics::{pcc_shift_delay, rmse, CHANNELS};
use noimu::trainer::evaluate;
use noimu::{Error, Result};

use super::load_sequences;
use crate::run_dir::RunDir;
use crate::settings::Settings;

#[derive(Debug, Clone, Args)]
pub struct DelayArgs {
    /// `LABEL=CHECKPOINT`, e.g. `quarter=runs/q/checkpoint.ckpt`; repeatable.
    #[arg(long = "model", required = true)]
    pub models: Vec<String>,
    /// `LABEL=DATASET` giving the evaluation data at that model's
    /// resolution; repeatable.
    #[arg(long = "data", required = true)]
    pub data: Vec<String>,
}

fn split_pair(s: &str) -> Result<(String, PathBuf)> {
    let (l, p) = s
        .split_once('=')
        .filter(|(l, p)| !l.is_empty() && !p.is_empty())
        .ok_or_else(|| Error::Config(format!("expected LABEL=PATH, got {s:?}")))?;
    Ok((l.to_string(), PathBuf::from(p)))
}

/// Truth delayed by `shift` frames, holding the first value.
pub fn shifted(series: &[f64], shift: usize) -> Vec<f64> {
    (0..series.len()).map(|i| series[i.saturating_sub(shift)]).collect()
}

struct Row {
    label: String,
    pred: Vec<[f64; 4]>,
    truth: Vec<[f64; 4]>,
}

pub fn run(settings: &Settings, args: &DelayArgs) -> Result<()> {
    let max_shift: usize = settings.kv.parse_or("max_shift_frames", 20)?;
    let control_shift: usize = settings.kv.parse_or("control_shift_frames", 3)?;
    if control_shift > max_shift {
        return Err(Error::Config("control_shift_frames exceeds max_shift_frames".into()));
    }
    let models = args.models.iter().map(|s| split_pair(s)).collect::<Result<Vec<_>>>()?;
    let data = args.data.iter().map(|s| split_pair(s)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (label, ckpt) in &models {
        let dir = data
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, p)| p.clone())
            .ok_or_else(|| Error::Config(format!("no --data given for model {label}")))?;
        let mut net = EstimatorNetwork::<f32>::load(ckpt)?;
        let (mut pred, mut truth) = (Vec::new(), Vec::new());
        for s in load_sequences(&[dir], settings)? {
            let ev = evaluate(&mut net, &s.sequence, label)?;
            pred.extend(ev.predictions);
            truth.extend(ev.truth);
        }
        rows.push(Row { label: label.clone(), pred, truth });
    }
    // Control rows: the truth itself, and the truth delayed by a known shift.
    let truth = rows[0].truth.clone();
    let delayed: Vec<[f64; 4]> = {
        let cols: Vec<Vec<f64>> = (0..4).map(|c| shifted(&truth.iter().map(|r| r[c]).collect::<Vec<_>>(), control_shift)).collect();
        (0..truth.len()).map(|i| [cols[0][i], cols[1][i], cols[2][i], cols[3][i]]).collect()
    };
    rows.push(Row { label: "ground_truth".into(), pred: truth.clone(), truth: truth.clone() });
    rows.push(Row { label: format!("truth_shifted_{control_shift}"), pred: delayed, truth });

    let mut delays = String::from("label,channel,delay_frames,delay_ms,peak_pcc,rmse\n");
    let mut curves = String::from("label,channel,shift_frames,pcc\n");
    for row in &rows {
        for (c, name) in CHANNELS.iter().enumerate() {
            let p: Vec<f64> = row.pred.iter().map(|r| r[c]).collect();
            let t: Vec<f64> = row.truth.iter().map(|r| r[c]).collect();
            let d = pcc_shift_delay(&p, &t, max_shift)?;
            let e = rmse(&p, &t)?;
            writeln!(delays, "{},{name},{},{},{},{e}", row.label, d.delay_frames, d.delay_frames * 5, d.peak_pcc).unwrap();
            for (k, v) in &d.curve {
                writeln!(curves, "{},{name},{k},{v}", row.label).unwrap();
            }
        }
    }
    let inputs: Vec<&Path> = models.iter().chain(&data).map(|(_, p)| p.as_path()).collect();
    let mut run = RunDir::create(settings, "delay-study", &inputs)?;
    eprint!("{delays}");
    run.write("delays.csv", delays)?;
    run.write("pcc_curves.csv", curves)?;
    run.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_and_shift() {
        assert_eq!(split_pair("half=a/b.ckpt").unwrap(), ("half".into(), PathBuf::from("a/b.ckpt")));
        assert!(split_pair("half").is_err());
        assert!(split_pair("=x").is_err());
        assert_eq!(shifted(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.0, 1.0, 1.0, 2.0]);
    }
}
