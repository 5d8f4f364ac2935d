use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::filter::{ekf_predict, ekf_update, predict_flow, EkfConfig, FilterMode, FilterState};
use crate::error::{Error, Result};
use crate::estimator::Estimate;
use crate::simcore::{step_extended_model, step_planar_model, ExtendedState, PlanarState};

/// Noise-free model trajectory with its inputs and ventral flow.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTrajectory {
    pub mode: FilterMode,
    pub dt: f64,
    /// `states[k]` is the state at `k·dt`.
    pub states: Vec<Vec<f64>>,
    /// Input applied from `k·dt` to `(k+1)·dt`.
    pub inputs: Vec<f64>,
    /// Flow at `k·dt`.
    pub flow: Vec<f64>,
}

impl ModelTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Integrates the model from `x0` under `input(t)` for `n` ticks.
pub fn simulate_model(
    mode: FilterMode,
    x0: &[f64],
    input: impl Fn(f64) -> f64,
    dt: f64,
    n: usize,
    inertia: f64,
) -> Result<ModelTrajectory> {
    if x0.len() != mode.dim() {
        return Err(Error::Shape(format!("{mode} model needs {} states", mode.dim())));
    }
    if !(dt > 0.0) {
        return Err(Error::Config("time step must be positive".into()));
    }
    let mut states = Vec::with_capacity(n);
    let mut inputs = Vec::with_capacity(n);
    let mut flow = Vec::with_capacity(n);
    let mut x = x0.to_vec();
    for k in 0..n {
        let u = input(k as f64 * dt);
        flow.push(predict_flow(mode, &x, u)?);
        states.push(x.clone());
        inputs.push(u);
        x = match mode {
            FilterMode::Planar => step_planar_model(PlanarState::new(x[0], x[1], x[2]), u, dt)?.to_array().to_vec(),
            FilterMode::Extended => {
                step_extended_model(ExtendedState::new(x[0], x[1], x[2], x[3]), u, inertia, dt)?.to_array().to_vec()
            }
        };
    }
    Ok(ModelTrajectory { mode, dt, states, inputs, flow })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterRow {
    pub t: f64,
    pub roll: f64,
    pub rate: f64,
    pub roll_variance: f64,
    pub true_roll: f64,
    pub normalized_innovation: f64,
}

impl FilterRow {
    /// The row as an attitude estimate; the filter says nothing about pitch.
    pub fn to_estimate(&self) -> Estimate {
        Estimate { t_us: (self.t * 1e6).round() as u64, roll: self.roll, pitch: 0.0, p: self.rate, q: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterLog {
    pub rows: Vec<FilterRow>,
    /// Time at which the divergence detector fired.
    pub diverged_at: Option<f64>,
    /// Mean squared normalized innovation.
    pub mean_nis: f64,
}

impl FilterLog {
    pub fn final_roll_error(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| (r.roll - r.true_roll).abs())
    }

    /// First time after which the roll error stays below `bound`.
    pub fn settling_time(&self, bound: f64) -> Option<f64> {
        let mut settled = None;
        for r in &self.rows {
            if (r.roll - r.true_roll).abs() < bound {
                settled.get_or_insert(r.t);
            } else {
                settled = None;
            }
        }
        settled
    }

    /// Angles in degrees, rates in deg/s, the roll variance in deg².
    pub const CSV_HEADER: &'static str = "t_us,phi,p,phi_var,phi_true,nis";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let deg = f64::to_degrees;
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                (r.t * 1e6).round() as u64,
                deg(r.roll),
                deg(r.rate),
                r.roll_variance * deg(1.0).powi(2),
                deg(r.true_roll),
                r.normalized_innovation.powi(2)
            ));
        }
        s
    }
}

/// Runs the filter along `traj`, measuring flow with Gaussian noise of
/// standard deviation `measurement_sigma` (zero gives exact measurements).
pub fn run_filter(
    traj: &ModelTrajectory,
    init: FilterState,
    cfg: &EkfConfig,
    measurement_sigma: f64,
    seed: u64,
) -> Result<FilterLog> {
    cfg.validate()?;
    if init.mode != traj.mode || cfg.mode != traj.mode {
        return Err(Error::Config("filter and trajectory modes differ".into()));
    }
    let noise = Normal::new(0.0, measurement_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fs = init;
    let mut rows = Vec::with_capacity(traj.len());
    let mut outside_since: Option<f64> = None;
    let mut diverged_at = None;
    let mut nis_sum = 0.0;
    for k in 0..traj.len() {
        let t = k as f64 * traj.dt;
        if k > 0 {
            ekf_predict(&mut fs, traj.inputs[k - 1], traj.dt, cfg)?;
        }
        let measured = traj.flow[k] + noise.sample(&mut rng);
        let inn = ekf_update(&mut fs, measured, traj.inputs[k], cfg)?;
        let nu = inn.normalized();
        nis_sum += nu * nu;
        if nu.abs() > cfg.divergence_sigma {
            let since = *outside_since.get_or_insert(t);
            if diverged_at.is_none() && t - since > cfg.divergence_time_s {
                diverged_at = Some(t);
            }
        } else {
            outside_since = None;
        }
        let rate = fs.rate().unwrap_or(traj.inputs[k]);
        rows.push(FilterRow {
            t,
            roll: fs.roll(),
            rate,
            roll_variance: fs.roll_variance(),
            true_roll: traj.states[k][1],
            normalized_innovation: nu,
        });
    }
    let mean_nis = nis_sum / traj.len().max(1) as f64;
    Ok(FilterLog { rows, diverged_at, mean_nis })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn excitation(t: f64) -> f64 {
        0.3 * (std::f64::consts::PI * t).cos()
    }

    #[test]
    fn exact_init_and_measurements_track_truth() {
        let traj = simulate_model(FilterMode::Planar, &[0.2, 0.05, 1.0], excitation, 0.005, 1000, 0.0035).unwrap();
        let init = FilterState::new(FilterMode::Planar, &traj.states[0], &[0.0; 3]).unwrap();
        let log = run_filter(&traj, init, &EkfConfig { q_vy: 0.0, q_roll: 0.0, q_z: 0.0, ..Default::default() }, 0.0, 1)
            .unwrap();
        for r in &log.rows {
            assert!((r.roll - r.true_roll).abs() < 1e-6);
        }
        assert!(log.diverged_at.is_none());
    }

    #[test]
    fn divergence_detector_fires_on_inconsistent_data() {
        let mut traj = simulate_model(FilterMode::Planar, &[0.0, 0.0, 1.0], |_| 0.0, 0.005, 600, 0.0035).unwrap();
        traj.flow.iter_mut().for_each(|w| *w += 2.0);
        let init = FilterState::new(FilterMode::Planar, &[0.0, 0.0, 1.0], &[1e-6; 3]).unwrap();
        let cfg = EkfConfig { q_vy: 0.0, q_roll: 0.0, q_z: 0.0, ..Default::default() };
        let log = run_filter(&traj, init, &cfg, 0.0, 1).unwrap();
        assert!(log.diverged_at.is_some());
        assert!(log.to_csv().starts_with(FilterLog::CSV_HEADER));
    }
}
