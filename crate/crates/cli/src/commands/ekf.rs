use std::f64::consts::TAU;
use std::fmt::Write as _;

use clap::{Args, ValueEnum};
use noimu::ekf::{observability_matrix, run_filter, simulate_model, EkfConfig, FilterMode, FilterState};
use noimu::kv::KeyValues;
use noimu::{Error, Result};

use crate::run_dir::RunDir;
use crate::settings::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrajectoryKind {
    /// Sinusoidal roll-rate excitation.
    Excited,
    /// Level hover with no input.
    Hover,
}

#[derive(Debug, Clone, Args)]
pub struct EkfArgs {
    #[arg(long, value_enum, default_value = "excited")]
    pub trajectory: TrajectoryKind,
    /// Run length in seconds (config key `duration_s`, default 10).
    #[arg(long)]
    pub duration: Option<f64>,
}

const DT: f64 = 0.005;

/// Rank of the observability matrix over a grid of states, both models.
fn rank_table(inertia: f64) -> Result<String> {
    let mut s = String::from("mode,vy,phi_deg,p_dps,z,rank,dim,sigma_min,sigma_max\n");
    for mode in [FilterMode::Planar, FilterMode::Extended] {
        for vy in [0.0, 0.5] {
            for phi_deg in [0.0, 2.0, 10.0] {
                for p_dps in [0.0, 0.3f64.to_degrees()] {
                    let (phi, p) = (f64::to_radians(phi_deg), f64::to_radians(p_dps));
                    let o = match mode {
                        FilterMode::Planar => observability_matrix(mode, &[vy, phi, 1.0], p, inertia)?,
                        FilterMode::Extended => observability_matrix(mode, &[vy, phi, p, 1.0], 0.0, inertia)?,
                    };
                    let sv = &o.singular_values;
                    writeln!(
                        s,
                        "{mode},{vy},{phi_deg},{p_dps},1,{},{},{},{}",
                        o.rank,
                        mode.dim(),
                        sv[sv.len() - 1],
                        sv[0]
                    )
                    .unwrap();
                }
            }
        }
    }
    Ok(s)
}

pub fn run(settings: &Settings, args: &EkfArgs) -> Result<()> {
    let mut settings = settings.clone();
    let kv = &mut settings.kv;
    if let Some(d) = args.duration {
        kv.set("duration_s", d);
    }
    kv.set("trajectory", format!("{:?}", args.trajectory).to_lowercase());
    let cfg = EkfConfig::from_kv(kv)?;
    let duration_s: f64 = kv.parse_or("duration_s", 10.0)?;
    if !(duration_s > 0.0) {
        return Err(Error::Config("duration_s must be positive".into()));
    }
    let amp = kv.parse_or("excitation_rate_dps", 0.3f64.to_degrees())?.to_radians();
    let freq: f64 = kv.parse_or("excitation_hz", 0.5)?;
    let roll_error = kv.parse_or("roll_error_deg", 10.0f64)?.to_radians();
    let z0: f64 = kv.parse_or("initial_height", 1.0)?;
    let seed: u64 = kv.parse_or("seed", 1)?;
    let excited = args.trajectory == TrajectoryKind::Excited;
    let (vy0, roll0) = if excited {
        (kv.parse_or("initial_vy", 0.3)?, kv.parse_or("initial_roll_deg", 0.0f64)?.to_radians())
    } else {
        (0.0, 0.0)
    };
    let a = if excited { amp } else { 0.0 };
    let n = (duration_s / DT).round() as usize;
    let inertia = cfg.inertia;
    let (traj, guess, variances) = match cfg.mode {
        FilterMode::Planar => (
            simulate_model(cfg.mode, &[vy0, roll0, z0], |t| a * (TAU * freq * t).cos(), DT, n, inertia)?,
            vec![vy0, roll0 + roll_error, z0],
            vec![0.05, 0.05, 0.01],
        ),
        FilterMode::Extended => (
            simulate_model(cfg.mode, &[vy0, roll0, a, z0], |t| -inertia * a * TAU * freq * (TAU * freq * t).sin(), DT, n, inertia)?,
            vec![vy0, roll0 + roll_error, a, z0],
            vec![0.05, 0.05, 0.01, 0.01],
        ),
    };
    let init = FilterState::new(cfg.mode, &guess, &variances)?;
    let log = run_filter(&traj, init, &cfg, cfg.flow_sigma, seed)?;

    let mut min_rank = cfg.mode.dim();
    for k in (0..traj.len()).step_by(20) {
        let o = observability_matrix(cfg.mode, &traj.states[k], traj.inputs[k], inertia)?;
        min_rank = min_rank.min(o.rank);
    }

    let mut summary = KeyValues::new();
    summary.set("mode", cfg.mode);
    summary.set("trajectory", kv.get("trajectory").unwrap_or_default());
    summary.set("frames", log.rows.len());
    summary.set("final_roll_error_deg", log.final_roll_error().to_degrees());
    summary.set("settling_time_1deg_s", log.settling_time(1f64.to_radians()).map_or("never".into(), |t| t.to_string()));
    summary.set("mean_nis", log.mean_nis);
    summary.set("diverged_at_s", log.diverged_at.map_or("never".into(), |t| t.to_string()));
    summary.set("min_observability_rank", min_rank);
    summary.set("state_dim", cfg.mode.dim());
    if min_rank < cfg.mode.dim() {
        let w = format!(
            "state not locally observable along the trajectory (rank {min_rank} of {}); near-zero attitude and rate leave directions unconstrained",
            cfg.mode.dim()
        );
        eprintln!("warning: {w}");
        summary.set("warning", w);
    }

    let mut run = RunDir::create(&settings, "ekf", &[])?;
    run.write("ekf_log.csv", log.to_csv())?;
    run.write("observability.csv", rank_table(inertia)?)?;
    eprint!("{summary}");
    run.write("summary.txt", summary.to_string())?;
    run.finish()?;
    match log.diverged_at {
        Some(t) => Err(Error::Numeric(format!("filter diverged at t = {t} s"))),
        None => Ok(()),
    }
}
