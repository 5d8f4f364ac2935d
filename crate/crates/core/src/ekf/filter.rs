use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::simcore::{extended_derivative, planar_derivative, step_extended_model, step_planar_model, ExtendedState, PlanarState, GRAVITY};

/// Which motion model the filter runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    /// State `[υ_y, φ, z]`, input roll rate `p`.
    Planar,
    /// State `[υ_y, φ, p, z]`, input roll moment `M`.
    Extended,
}

impl FilterMode {
    pub fn dim(self) -> usize {
        match self {
            Self::Planar => 3,
            Self::Extended => 4,
        }
    }

    /// Index of `z` in the state vector.
    pub fn z_index(self) -> usize {
        self.dim() - 1
    }
}

impl FromStr for FilterMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planar" => Ok(Self::Planar),
            "extended" => Ok(Self::Extended),
            _ => Err(Error::Config(format!("unknown filter mode {s:?}"))),
        }
    }
}

impl fmt::Display for FilterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Planar => "planar",
            Self::Extended => "extended",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkfConfig {
    pub mode: FilterMode,
    /// Standard deviation of the flow measurement, rad/s.
    pub flow_sigma: f64,
    /// Process noise spectral densities per state (per second).
    pub q_vy: f64,
    pub q_roll: f64,
    pub q_p: f64,
    pub q_z: f64,
    /// Roll inertia used by the extended model.
    pub inertia: f64,
    /// Normalized innovation bound and how long it may be exceeded.
    pub divergence_sigma: f64,
    pub divergence_time_s: f64,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            mode: FilterMode::Planar,
            flow_sigma: 0.05,
            q_vy: 1e-3,
            q_roll: 1e-5,
            q_p: 1e-2,
            q_z: 1e-6,
            inertia: 0.0035,
            divergence_sigma: 3.0,
            divergence_time_s: 1.0,
        }
    }
}

impl EkfConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.flow_sigma, self.inertia, self.divergence_sigma, self.divergence_time_s];
        let nonneg = [self.q_vy, self.q_roll, self.q_p, self.q_z];
        if pos.iter().any(|v| !(*v > 0.0)) || nonneg.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("filter noise settings must be positive".into()));
        }
        Ok(())
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let c = Self {
            mode: kv.parse_or("filter_mode", d.mode)?,
            flow_sigma: kv.parse_or("flow_sigma", d.flow_sigma)?,
            q_vy: kv.parse_or("q_vy", d.q_vy)?,
            q_roll: kv.parse_or("q_roll", d.q_roll)?,
            q_p: kv.parse_or("q_p", d.q_p)?,
            q_z: kv.parse_or("q_z", d.q_z)?,
            inertia: kv.parse_or("inertia_xx", d.inertia)?,
            divergence_sigma: kv.parse_or("divergence_sigma", d.divergence_sigma)?,
            divergence_time_s: kv.parse_or("divergence_time_s", d.divergence_time_s)?,
        };
        c.validate()?;
        Ok(c)
    }

    fn process_noise(&self) -> DMatrix<f64> {
        let d: Vec<f64> = match self.mode {
            FilterMode::Planar => vec![self.q_vy, self.q_roll, self.q_z],
            FilterMode::Extended => vec![self.q_vy, self.q_roll, self.q_p, self.q_z],
        };
        DMatrix::from_diagonal(&DVector::from_vec(d))
    }
}

/// Mean and covariance of the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub mode: FilterMode,
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl FilterState {
    pub fn new(mode: FilterMode, x: &[f64], variances: &[f64]) -> Result<Self> {
        if x.len() != mode.dim() || variances.len() != mode.dim() {
            return Err(Error::Shape(format!("{mode} filter needs {} states", mode.dim())));
        }
        if variances.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Domain("initial variances must be non-negative".into()));
        }
        Ok(Self { mode, x: DVector::from_column_slice(x), p: DMatrix::from_diagonal(&DVector::from_column_slice(variances)) })
    }

    pub fn roll(&self) -> f64 {
        self.x[1]
    }

    pub fn roll_variance(&self) -> f64 {
        self.p[(1, 1)]
    }

    /// Roll rate: the state in extended mode, otherwise `None`.
    pub fn rate(&self) -> Option<f64> {
        (self.mode == FilterMode::Extended).then(|| self.x[2])
    }

    pub fn is_symmetric_psd(&self, tol: f64) -> bool {
        let sym = (&self.p - self.p.transpose()).abs().max() <= tol;
        sym && self.p.clone().symmetric_eigenvalues().iter().all(|&e| e >= -tol)
    }
}

/// Continuous-time model derivative.
pub fn model_derivative(mode: FilterMode, x: &[f64], input: f64, inertia: f64) -> Result<Vec<f64>> {
    match mode {
        FilterMode::Planar => Ok(planar_derivative(&[x[0], x[1], x[2]], input)?.to_vec()),
        FilterMode::Extended => Ok(extended_derivative(&[x[0], x[1], x[2], x[3]], input, inertia)?.to_vec()),
    }
}

/// `∂f/∂x` of the continuous model.
pub fn state_jacobian(mode: FilterMode, x: &[f64]) -> DMatrix<f64> {
    let n = mode.dim();
    let mut f = DMatrix::zeros(n, n);
    let c = x[1].cos();
    f[(0, 1)] = GRAVITY / (c * c);
    if mode == FilterMode::Extended {
        f[(1, 2)] = 1.0;
    }
    f
}

/// Predicted ventral flow `−cos²φ·υ_y/z + p`.
pub fn predict_flow(mode: FilterMode, x: &[f64], input: f64) -> Result<f64> {
    let z = x[mode.z_index()];
    if !(z > 0.0) {
        return Err(Error::Domain(format!("height {z} must be positive")));
    }
    let p = match mode {
        FilterMode::Planar => input,
        FilterMode::Extended => x[2],
    };
    let c = x[1].cos();
    Ok(-c * c * x[0] / z + p)
}

/// `∂ω_y/∂x`.
pub fn measurement_jacobian(mode: FilterMode, x: &[f64]) -> DVector<f64> {
    let z = x[mode.z_index()];
    let (vy, phi) = (x[0], x[1]);
    let c2 = phi.cos().powi(2);
    let mut h = DVector::zeros(mode.dim());
    h[0] = -c2 / z;
    h[1] = (2.0 * phi).sin() * vy / z;
    h[mode.z_index()] = c2 * vy / (z * z);
    if mode == FilterMode::Extended {
        h[2] = 1.0;
    }
    h
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let t = p.transpose();
    *p = (&*p + t) * 0.5;
}

/// Propagates mean (RK4) and covariance over `dt`.
pub fn ekf_predict(fs: &mut FilterState, input: f64, dt: f64, cfg: &EkfConfig) -> Result<()> {
    let x = fs.x.as_slice();
    let f = state_jacobian(fs.mode, x);
    let next: Vec<f64> = match fs.mode {
        FilterMode::Planar => step_planar_model(PlanarState::new(x[0], x[1], x[2]), input, dt)?.to_array().to_vec(),
        FilterMode::Extended => {
            step_extended_model(ExtendedState::new(x[0], x[1], x[2], x[3]), input, cfg.inertia, dt)?.to_array().to_vec()
        }
    };
    let n = fs.mode.dim();
    let phi = DMatrix::identity(n, n) + &f * dt + &f * &f * (0.5 * dt * dt);
    fs.p = &phi * &fs.p * phi.transpose() + cfg.process_noise() * dt;
    symmetrize(&mut fs.p);
    fs.x = DVector::from_vec(next);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Innovation {
    pub residual: f64,
    pub variance: f64,
}

impl Innovation {
    /// Innovation divided by its predicted standard deviation.
    pub fn normalized(&self) -> f64 {
        self.residual / self.variance.sqrt()
    }
}

/// Scalar EKF update with a measured flow value.
pub fn ekf_update(fs: &mut FilterState, measured: f64, input: f64, cfg: &EkfConfig) -> Result<Innovation> {
    let x = fs.x.as_slice();
    let pred = predict_flow(fs.mode, x, input)?;
    let h = measurement_jacobian(fs.mode, x);
    let ph = &fs.p * &h;
    let s = h.dot(&ph) + cfg.flow_sigma * cfg.flow_sigma;
    if !(s > 1e-15) || !s.is_finite() {
        return Err(Error::Numeric(format!("singular innovation covariance {s}")));
    }
    let k = &ph / s;
    let residual = measured - pred;
    fs.x += &k * residual;
    // Joseph form keeps the covariance positive semidefinite.
    let n = fs.mode.dim();
    let ikh = DMatrix::identity(n, n) - &k * h.transpose();
    fs.p = &ikh * &fs.p * ikh.transpose() + &k * k.transpose() * (cfg.flow_sigma * cfg.flow_sigma);
    symmetrize(&mut fs.p);
    if !fs.x.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("filter state became non-finite".into()));
    }
    Ok(Innovation { residual, variance: s })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_state_is_fixed() {
        let cfg = EkfConfig::default();
        let mut fs = FilterState::new(FilterMode::Planar, &[0.0, 0.0, 1.0], &[0.1, 0.1, 0.1]).unwrap();
        ekf_predict(&mut fs, 0.0, 0.005, &cfg).unwrap();
        assert_eq!(fs.x.as_slice(), &[0.0, 0.0, 1.0]);
        assert!(fs.is_symmetric_psd(1e-12));
    }

    #[test]
    fn jacobians_at_level() {
        let f = state_jacobian(FilterMode::Planar, &[0.0, 0.0, 1.0]);
        assert_eq!(f[(0, 1)], GRAVITY);
        let h = measurement_jacobian(FilterMode::Extended, &[0.0, 0.0, 0.0, 2.0]);
        assert_eq!(h.as_slice(), &[-0.5, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        for mode in [FilterMode::Planar, FilterMode::Extended] {
            let x: Vec<f64> = if mode == FilterMode::Planar { vec![0.7, 0.3, 1.4] } else { vec![0.7, 0.3, -0.2, 1.4] };
            let h = measurement_jacobian(mode, &x);
            let f = state_jacobian(mode, &x);
            for i in 0..x.len() {
                let e = 1e-6;
                let (mut a, mut b) = (x.clone(), x.clone());
                a[i] += e;
                b[i] -= e;
                let num = (predict_flow(mode, &a, 0.1).unwrap() - predict_flow(mode, &b, 0.1).unwrap()) / (2.0 * e);
                assert!((num - h[i]).abs() <= 1e-6 * num.abs().max(1e-6), "{mode} h[{i}]");
                let da = model_derivative(mode, &a, 0.1, 0.0035).unwrap();
                let db = model_derivative(mode, &b, 0.1, 0.0035).unwrap();
                for r in 0..x.len() {
                    let num = (da[r] - db[r]) / (2.0 * e);
                    assert!((num - f[(r, i)]).abs() <= 1e-6 * num.abs().max(1e-6), "{mode} F[{r},{i}]");
                }
            }
        }
    }

    #[test]
    fn zero_innovation_keeps_mean() {
        let cfg = EkfConfig::default();
        let mut fs = FilterState::new(FilterMode::Planar, &[0.4, 0.1, 1.0], &[0.1, 0.1, 0.01]).unwrap();
        let m = predict_flow(FilterMode::Planar, fs.x.as_slice(), 0.2).unwrap();
        let before = fs.x.clone();
        let inn = ekf_update(&mut fs, m, 0.2, &cfg).unwrap();
        assert_eq!(inn.residual, 0.0);
        assert_eq!(fs.x, before);
        assert!(fs.roll_variance() < 0.1);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(FilterState::new(FilterMode::Extended, &[0.0; 3], &[1.0; 3]).is_err());
        let cfg = EkfConfig { flow_sigma: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let mut fs = FilterState::new(FilterMode::Planar, &[0.0, 0.0, -1.0], &[0.0; 3]).unwrap();
        assert!(ekf_update(&mut fs, 0.0, 0.0, &EkfConfig::default()).is_err());
    }
}
