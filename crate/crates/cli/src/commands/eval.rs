use std::path::PathBuf;

use clap::Args;
use noimu::estimator::EstimatorNetwork;
use noimu::kv::KeyValues;
use noimu::metrics::{bias_subtracted_histogram, EvaluationReport};
use noimu::trainer::evaluate;
use noimu::Result;

use super::{load_sequences, predictions_csv};
use crate::run_dir::RunDir;
use crate::settings::Settings;

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset sequences or `gen-data` run directories.
    #[arg(required = true)]
    pub datasets: Vec<PathBuf>,
}

/// Error histograms with the biases of prediction and truth removed.
fn histograms_csv(pred: &[[f64; 4]], truth: &[[f64; 4]], kv: &KeyValues) -> Result<String> {
    let att_bin = kv.parse_or("hist_attitude_bin_deg", 0.25)?;
    let att_range = kv.parse_or("hist_attitude_range_deg", 3.0)?;
    let rate_bin = kv.parse_or("hist_rate_bin_dps", 1.5)?;
    let rate_range = kv.parse_or("hist_rate_range_dps", 18.0)?;
    let mut s = String::from("channel,center,count\n");
    for (c, name) in noimu::metrics::CHANNELS.iter().enumerate() {
        let p: Vec<f64> = pred.iter().map(|r| r[c]).collect();
        let t: Vec<f64> = truth.iter().map(|r| r[c]).collect();
        let (bin, range) = if c < 2 { (att_bin, att_range) } else { (rate_bin, rate_range) };
        let h = bias_subtracted_histogram(&p, &t, bin, range)?;
        for (i, n) in h.counts.iter().enumerate() {
            s.push_str(&format!("{name},{},{n}\n", h.center(i)));
        }
    }
    Ok(s)
}

pub fn run(settings: &Settings, args: &EvalArgs) -> Result<()> {
    let mut net = EstimatorNetwork::<f32>::load(&args.checkpoint)?;
    let seqs = load_sequences(&args.datasets, settings)?;
    let mut reports = Vec::new();
    let mut all_pred = Vec::new();
    let mut all_truth = Vec::new();
    let mut per_sequence = Vec::new();
    for s in &seqs {
        let ev = evaluate(&mut net, &s.sequence, &s.label)?;
        all_pred.extend_from_slice(&ev.predictions);
        all_truth.extend_from_slice(&ev.truth);
        reports.push(ev.report.clone());
        per_sequence.push(ev);
    }
    let total = EvaluationReport::compute("all", &all_pred, &all_truth)?;

    let inputs: Vec<&std::path::Path> =
        std::iter::once(args.checkpoint.as_path()).chain(args.datasets.iter().map(PathBuf::as_path)).collect();
    let mut run = RunDir::create(settings, "eval", &inputs)?;
    let mut table = format!("{}\n", EvaluationReport::CSV_HEADER);
    for r in reports.iter().chain(std::iter::once(&total)) {
        table.push_str(&r.csv_row());
        table.push('\n');
    }
    eprint!("{table}");
    run.write("metrics.csv", table)?;
    for (i, ev) in per_sequence.iter().enumerate() {
        run.write(&format!("predictions_{i:03}.csv"), predictions_csv(&ev.predictions, &ev.truth))?;
    }
    run.write("error_histograms.csv", histograms_csv(&all_pred, &all_truth, &settings.kv)?)?;
    let mut summary = KeyValues::new();
    summary.set("variant", net.variant());
    for (i, r) in reports.iter().enumerate() {
        summary.set(&format!("sequence_{i:03}"), &r.label);
    }
    total.to_kv(&mut summary, "all_");
    run.write("summary.txt", summary.to_string())?;
    run.finish()?;
    Ok(())
}
