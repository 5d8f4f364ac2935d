//! Reduced roll-axis models used by the filter baseline and observability
//! analysis. The pitch axis uses the same equations with `θ`, `q` and a
//! sign-flipped forward velocity.

use num_traits::{Float, FloatConst};

use crate::error::{Error, Result};
use crate::simcore::GRAVITY;

/// `[υ_y, φ, z]`: lateral body velocity, roll, height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarState<T> {
    pub vy: T,
    pub roll: T,
    pub z: T,
}

/// `[υ_y, φ, p, z]`, the planar state with the roll rate promoted to a state
/// driven by a roll moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedState<T> {
    pub vy: T,
    pub roll: T,
    pub p: T,
    pub z: T,
}

impl<T: Float> PlanarState<T> {
    pub fn new(vy: T, roll: T, z: T) -> Self {
        Self { vy, roll, z }
    }

    pub fn to_array(self) -> [T; 3] {
        [self.vy, self.roll, self.z]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self { vy: a[0], roll: a[1], z: a[2] }
    }
}

impl<T: Float> ExtendedState<T> {
    pub fn new(vy: T, roll: T, p: T, z: T) -> Self {
        Self { vy, roll, p, z }
    }

    pub fn to_array(self) -> [T; 4] {
        [self.vy, self.roll, self.p, self.z]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self { vy: a[0], roll: a[1], p: a[2], z: a[3] }
    }

    pub fn planar(self) -> PlanarState<T> {
        PlanarState { vy: self.vy, roll: self.roll, z: self.z }
    }
}

fn g<T: Float>() -> T {
    T::from(GRAVITY).unwrap()
}

fn check_roll<T: Float + FloatConst>(roll: T) -> Result<()> {
    if !roll.is_finite() || roll.abs() >= T::FRAC_PI_2() {
        return Err(Error::Domain(format!(
            "roll {:?} rad outside (-pi/2, pi/2)",
            roll.to_f64()
        )));
    }
    Ok(())
}

fn check_dt<T: Float>(dt: T) -> Result<()> {
    let dt = dt.to_f64().unwrap_or(f64::NAN);
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(Error::Domain(format!("step {dt} s outside (0, 0.01]")));
    }
    Ok(())
}

fn rk4<T: Float, const N: usize>(
    x: [T; N],
    dt: T,
    f: impl Fn(&[T; N]) -> Result<[T; N]>,
) -> Result<[T; N]> {
    let two = T::one() + T::one();
    let six = two + two + two;
    let shift = |x: &[T; N], k: &[T; N], s: T| {
        let mut out = *x;
        for i in 0..N {
            out[i] = x[i] + k[i] * s;
        }
        out
    };
    let k1 = f(&x)?;
    let k2 = f(&shift(&x, &k1, dt / two))?;
    let k3 = f(&shift(&x, &k2, dt / two))?;
    let k4 = f(&shift(&x, &k3, dt))?;
    let mut out = x;
    for i in 0..N {
        out[i] = x[i] + dt / six * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Time derivative of the planar model for roll-rate input `p`.
pub fn planar_derivative<T: Float + FloatConst>(x: &[T; 3], p: T) -> Result<[T; 3]> {
    check_roll(x[1])?;
    Ok([g::<T>() * x[1].tan(), p, T::zero()])
}

/// One RK4 step of `υ̇_y = g·tan φ, φ̇ = p, ż = 0`.
pub fn step_planar_model<T: Float + FloatConst>(x: PlanarState<T>, p: T, dt: T) -> Result<PlanarState<T>> {
    check_dt(dt)?;
    let out = rk4(x.to_array(), dt, |s| planar_derivative(s, p))?;
    check_roll(out[1])?;
    Ok(PlanarState::from_array(out))
}

pub fn extended_derivative<T: Float + FloatConst>(x: &[T; 4], moment: T, inertia: T) -> Result<[T; 4]> {
    check_roll(x[1])?;
    Ok([g::<T>() * x[1].tan(), x[2], moment / inertia, T::zero()])
}

/// One RK4 step of the moment-driven model, `ṗ = M / I`.
pub fn step_extended_model<T: Float + FloatConst>(
    x: ExtendedState<T>,
    moment: T,
    inertia: T,
    dt: T,
) -> Result<ExtendedState<T>> {
    check_dt(dt)?;
    if !(inertia > T::zero()) {
        return Err(Error::Domain("inertia must be positive".into()));
    }
    let out = rk4(x.to_array(), dt, |s| extended_derivative(s, moment, inertia))?;
    check_roll(out[1])?;
    Ok(ExtendedState::from_array(out))
}

/// Ventral optical flow seen by a downward camera:
/// `ω_y = −cos²(φ)·υ_y / z + p`.
pub fn ventral_flow<T: Float + FloatConst>(x: PlanarState<T>, p: T) -> Result<T> {
    if !(x.z > T::zero()) {
        return Err(Error::Domain(format!("height {:?} must be positive", x.z.to_f64())));
    }
    check_roll(x.roll)?;
    let c = x.roll.cos();
    Ok(-c * c * x.vy / x.z + p)
}
