use super::params::{Gradients, ParamSet};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moments per parameter plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamSet<T>) -> Self {
        let zeros = || params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        Self { m: zeros(), v: zeros(), step: 0 }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<T: Scalar>(params: &mut ParamSet<T>, grads: &Gradients<T>, state: &mut AdamState<T>, lr: f64) -> Result<()> {
    if grads.tensors.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::Shape("optimizer state does not match parameters".into()));
    }
    if !grads.is_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    let (b1, b2, eps) = (T::lit(BETA1), T::lit(BETA2), T::lit(EPSILON));
    let (one, step) = (T::one(), T::lit(lr / c1));
    let inv_c2 = T::lit(1.0 / c2);
    for (i, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
        let g = grads.tensors[i].data();
        if g.len() != params.get(id).len() {
            return Err(Error::Shape(format!("gradient for {} has the wrong length", params.name(id))));
        }
        let (m, v) = (state.m[i].data_mut(), state.v[i].data_mut());
        let p = params.get_mut(id).data_mut();
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (one - b1) * g[k];
            v[k] = b2 * v[k] + (one - b2) * g[k] * g[k];
            p[k] -= step * m[k] / ((v[k] * inv_c2).sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_matches_hand_computation() {
        let mut p = ParamSet::<f64>::new();
        let id = p.add("x", Tensor::new(&[2], vec![1.0, -2.0]).unwrap());
        let mut s = AdamState::new(&p);
        let mut g = Gradients::zeros_like(&p);
        g.tensors[0] = Tensor::new(&[2], vec![0.3, -4.0]).unwrap();
        adam_step(&mut p, &g, &mut s, 1e-3).unwrap();
        // Scalar oracle: m̂ = g, v̂ = g², Δ = −lr·g/(|g| + ε).
        for (k, (&x0, &gk)) in [1.0f64, -2.0].iter().zip(&[0.3f64, -4.0]).enumerate() {
            let expect = x0 - 1e-3 * gk / (gk.abs() + 1e-8);
            assert!((p.get(id).data()[k] - expect).abs() < 1e-15);
        }
        assert_eq!(s.step, 1);
    }

    #[test]
    fn rejects_nan_gradient() {
        let mut p = ParamSet::<f32>::new();
        p.add("x", Tensor::zeros(&[1]));
        let mut g = Gradients::zeros_like(&p);
        g.tensors[0].data_mut()[0] = f32::NAN;
        let mut s = AdamState::new(&p);
        assert!(adam_step(&mut p, &g, &mut s, 1e-3).is_err());
    }
}
