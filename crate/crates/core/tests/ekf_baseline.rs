use nalgebra::{DMatrix, DVector};
use noimu::ekf::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const DT: f64 = 0.005;
const INERTIA: f64 = 0.0035;

fn excitation(t: f64) -> f64 {
    0.3 * (std::f64::consts::PI * t).cos()
}

fn excited_start(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 1.0).unwrap();
    vec![0.3 * n.sample(&mut rng), 0.03 * n.sample(&mut rng), 1.0 + 0.1 * n.sample(&mut rng)]
}

#[test]
fn converges_from_ten_degree_roll_error() {
    let cfg = EkfConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let x0 = excited_start(seed);
        let traj = simulate_model(FilterMode::Planar, &x0, excitation, DT, 1000, INERTIA).unwrap();
        let guess = [x0[0], x0[1] + 10f64.to_radians(), x0[2]];
        let init = FilterState::new(FilterMode::Planar, &guess, &[0.05, 0.05, 0.01]).unwrap();
        let log = run_filter(&traj, init, &cfg, cfg.flow_sigma, seed).unwrap();
        let t = log.settling_time(1f64.to_radians()).expect("never settled");
        assert!(t <= 5.0, "seed {seed} settled at {t}");
        worst = worst.max(t);
        assert!(log.diverged_at.is_none(), "seed {seed}");
    }
    println!("worst settling time {worst:.3} s");
}

#[test]
fn hover_leaves_height_unconstrained() {
    let cfg = EkfConfig::default();
    let traj = simulate_model(FilterMode::Planar, &[0.0, 0.0, 1.0], |_| 0.0, DT, 400, INERTIA).unwrap();
    let mut fs = FilterState::new(FilterMode::Planar, &[0.0, 0.0, 1.0], &[1e-4, 1e-4, 1e-4]).unwrap();
    let mut z_var = vec![fs.p[(2, 2)]];
    for k in 1..traj.len() {
        ekf_predict(&mut fs, 0.0, DT, &cfg).unwrap();
        ekf_update(&mut fs, traj.flow[k], 0.0, &cfg).unwrap();
        assert!(fs.is_symmetric_psd(1e-12));
        z_var.push(fs.p[(2, 2)]);
    }
    assert!(z_var.windows(2).all(|w| w[1] > w[0]));
    // Roll still receives information through the velocity coupling.
    assert!(fs.roll_variance() < 1e-4);
}

#[test]
fn covariance_propagation_matches_monte_carlo() {
    let cfg = EkfConfig { q_vy: 0.0, q_roll: 0.0, q_z: 0.0, ..Default::default() };
    let mean = [0.3, 0.1, 1.2];
    let var = [0.01, 1e-4, 1e-3];
    let mut fs = FilterState::new(FilterMode::Planar, &mean, &var).unwrap();
    let steps = 20;
    for _ in 0..steps {
        ekf_predict(&mut fs, 0.2, DT, &cfg).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = Normal::new(0.0, 1.0).unwrap();
    let samples = 10_000;
    let mut pts = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut x: Vec<f64> = (0..3).map(|i| mean[i] + var[i].sqrt() * n.sample(&mut rng)).collect();
        for _ in 0..steps {
            let mut probe = FilterState::new(FilterMode::Planar, &x, &[0.0; 3]).unwrap();
            ekf_predict(&mut probe, 0.2, DT, &cfg).unwrap();
            x = probe.x.as_slice().to_vec();
        }
        pts.push(DVector::from_vec(x));
    }
    let m: DVector<f64> = pts.iter().fold(DVector::zeros(3), |a, p| a + p) / samples as f64;
    let cov: DMatrix<f64> =
        pts.iter().fold(DMatrix::zeros(3, 3), |a, p| a + (p - &m) * (p - &m).transpose()) / (samples - 1) as f64;
    for i in 0..3 {
        let rel = (cov[(i, i)] - fs.p[(i, i)]).abs() / fs.p[(i, i)];
        assert!(rel < 0.05, "state {i}: mc {} ekf {}", cov[(i, i)], fs.p[(i, i)]);
    }
}

#[test]
fn filter_is_unbiased_over_seeds() {
    let cfg = EkfConfig::default();
    let seeds = 100;
    let mut e = Vec::new();
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = Normal::new(0.0, 1.0).unwrap();
        let truth = excited_start(seed);
        let p0: [f64; 3] = [0.01, 1e-3, 1e-3];
        let guess: Vec<f64> = (0..3).map(|i| truth[i] + p0[i].sqrt() * n.sample(&mut rng)).collect();
        let traj = simulate_model(FilterMode::Planar, &truth, excitation, DT, 400, INERTIA).unwrap();
        let log = run_filter(&traj, FilterState::new(FilterMode::Planar, &guess, &p0).unwrap(), &cfg, cfg.flow_sigma, seed)
            .unwrap();
        let r = log.rows.last().unwrap();
        e.push(r.roll - r.true_roll);
    }
    let mean = e.iter().sum::<f64>() / e.len() as f64;
    let sd = (e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (e.len() - 1) as f64).sqrt();
    assert!(mean.abs() <= 2.0 * sd / (e.len() as f64).sqrt(), "mean {mean} sd {sd}");
}

#[test]
fn observability_rank_structure() {
    let rest = observability_matrix(FilterMode::Planar, &[0.0, 0.0, 1.0], 0.0, INERTIA).unwrap();
    assert!(!rest.is_full_rank());
    let excited = observability_matrix(FilterMode::Planar, &[1.0, 0.2, 1.0], 0.3, INERTIA).unwrap();
    assert!(excited.is_full_rank());
    let scaled = observability_matrix(FilterMode::Planar, &[1.0, 0.2, 2.0], 0.3, INERTIA).unwrap();
    assert_eq!(scaled.rank, excited.rank);
    assert_ne!(scaled.singular_values, excited.singular_values);
    let ext = observability_matrix(FilterMode::Extended, &[1.0, 0.2, 0.3, 1.0], 0.001, INERTIA).unwrap();
    assert!(ext.is_full_rank(), "{:?}", ext.singular_values);
    let ext_rest = observability_matrix(FilterMode::Extended, &[0.0, 0.0, 0.0, 1.0], 0.0, INERTIA).unwrap();
    assert!(!ext_rest.is_full_rank());
}
