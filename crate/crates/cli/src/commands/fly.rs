use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use noimu::control::{closed_loop_run, ControlGains, EstimateSource, FlightLog, FlightOptions, FlightSummary, SourceMode};
use noimu::ekf::EkfConfig;
use noimu::estimator::EstimatorNetwork;
use noimu::eventcam::SensorSetup;
use noimu::kv::KeyValues;
use noimu::simcore::Scenario;
use noimu::{Error, Result};

use super::percentile;
use crate::run_dir::RunDir;
use crate::settings::Settings;

#[derive(Debug, Clone, Args)]
pub struct FlyArgs {
    /// Attitude source: ground_truth, network or ekf. Defaults to network
    /// when a checkpoint is given.
    #[arg(long)]
    pub source: Option<SourceMode>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Fly on ground truth until this time (s), then hand over to the source.
    #[arg(long)]
    pub switch_at: Option<f64>,
    /// Flight length in seconds (config key `duration_s`, default 60).
    #[arg(long)]
    pub duration: Option<f64>,
}

/// Source switches and the crash, if any, one row each.
fn markers_csv(log: &FlightLog) -> String {
    let mut s = String::from("t_us,event\n");
    for w in log.rows.windows(2) {
        if w[0].source != w[1].source {
            writeln!(s, "{},source_switch:{}->{}", w[1].t_us, w[0].source, w[1].source).unwrap();
        }
    }
    if let Some(c) = &log.crash {
        writeln!(s, "{},crash:{}", log.rows.last().map_or(0, |r| r.t_us), c.replace(',', ";")).unwrap();
    }
    s
}

fn summary_kv(log: &FlightLog) -> KeyValues {
    let sum = FlightSummary::from_log(log);
    let from_us = log.switch_s.map_or(0, |s| (s * 1e6).round() as u64);
    let judged = log.rows.iter().filter(|r| r.t_us >= from_us);
    let (att, rate): (Vec<f64>, Vec<f64>) = judged
        .map(|r| {
            let a = (r.estimate.roll - r.truth.roll).abs().max((r.estimate.pitch - r.truth.pitch).abs());
            let w = (r.estimate.p - r.truth.p).abs().max((r.estimate.q - r.truth.q).abs());
            (a.to_degrees(), w.to_degrees())
        })
        .unzip();
    let mut kv = KeyValues::new();
    kv.set("duration_s", sum.duration_s);
    kv.set("crashed", sum.crashed);
    if let Some(c) = &log.crash {
        kv.set("crash", c);
    }
    kv.set("max_abs_attitude_deg", sum.max_abs_attitude_deg);
    kv.set("position_rms_m", sum.position_rms_m);
    kv.set("estimate_within_3deg", sum.estimate_within_3deg);
    kv.set("rate_within_18dps", sum.rate_within_18dps);
    for q in [50, 90, 99] {
        kv.set(&format!("attitude_error_p{q}_deg"), percentile(&att, q as f64 / 100.0));
        kv.set(&format!("rate_error_p{q}_dps"), percentile(&rate, q as f64 / 100.0));
    }
    if let Some(s) = log.switch_s {
        kv.set("switch_s", s);
        kv.set("settle_after_switch_s", sum.settle_after_switch_s.map_or("never".to_string(), |v| v.to_string()));
    }
    kv
}

pub fn run(settings: &Settings, args: &FlyArgs) -> Result<()> {
    let mut settings = settings.clone();
    let kv = &mut settings.kv;
    if let Some(d) = args.duration {
        kv.set("duration_s", d);
    } else if !kv.contains("duration_s") {
        kv.set("duration_s", 60.0);
    }
    if !kv.contains("filter_mode") {
        kv.set("filter_mode", "extended");
    }
    let source = match (args.source, &args.checkpoint) {
        (Some(s), _) => s,
        (None, Some(_)) => SourceMode::Network,
        (None, None) => kv.parse_or("source", SourceMode::GroundTruth)?,
    };
    kv.set("source", source);
    if let Some(t) = args.switch_at {
        kv.set("switch_at_s", t);
    }
    let switch_at: Option<f64> = kv.parse_opt("switch_at_s")?;
    let scenario = Scenario::from_kv(kv.clone())?;
    let mut opts = FlightOptions::new(
        scenario,
        match switch_at {
            Some(t) => EstimateSource::switching(SourceMode::GroundTruth, t, source),
            None => EstimateSource::fixed(source),
        },
    );
    opts.gains = ControlGains::from_kv(kv)?;
    opts.sensor = SensorSetup::from_kv(kv)?;
    opts.ekf = EkfConfig::from_kv(kv)?;
    opts.initial_attitude = [
        kv.parse_or("initial_roll_deg", 0.0f64)?.to_radians(),
        kv.parse_or("initial_pitch_deg", 0.0f64)?.to_radians(),
    ];
    let mut network = match &args.checkpoint {
        Some(p) => Some(EstimatorNetwork::<f32>::load(p)?),
        None => None,
    };
    if network.is_some() && !opts.source.uses(SourceMode::Network) {
        return Err(Error::Config(format!("a checkpoint was given but the source is {source}")));
    }

    let inputs: Vec<&std::path::Path> = args.checkpoint.iter().map(PathBuf::as_path).collect();
    let mut run = RunDir::create(&settings, "fly", &inputs)?;
    let log = closed_loop_run(&opts, network.as_mut())?;
    run.write("flight_log.csv", log.to_csv_degrees())?;
    run.write("markers.csv", markers_csv(&log))?;
    let summary = summary_kv(&log);
    eprint!("{summary}");
    run.write("summary.txt", summary.to_string())?;
    run.finish()?;
    match log.crash {
        Some(c) => Err(Error::Crash(c)),
        None => Ok(()),
    }
}
