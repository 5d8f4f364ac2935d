//! Parameterised layers composed from tape primitives.

use rand::Rng;

use super::params::{ParamId, ParamSet};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dLayer {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2dLayer {
    /// `k×k` convolution with "same"-style padding `k/2`.
    pub fn new<T: Scalar>(
        params: &mut ParamSet<T>,
        name: &str,
        (cin, cout, k, stride): (usize, usize, usize, usize),
        bias: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = cin * k * k;
        let weight = params.add_uniform(format!("{name}.weight"), &[cout, cin, k, k], fan_in, rng);
        let bias = bias.then(|| params.add_uniform(format!("{name}.bias"), &[cout], fan_in, rng));
        Self { weight, bias, stride, pad: k / 2 }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let w = tape.param(self.weight);
        let b = self.bias.map(|b| tape.param(b));
        tape.conv2d(x, w, b, self.stride, self.pad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearLayer {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl LinearLayer {
    pub fn new<T: Scalar>(params: &mut ParamSet<T>, name: &str, inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let weight = params.add_uniform(format!("{name}.weight"), &[outputs, inputs], inputs, rng);
        let bias = params.add_uniform(format!("{name}.bias"), &[outputs], inputs, rng);
        Self { weight, bias }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let (w, b) = (tape.param(self.weight), tape.param(self.bias));
        tape.linear(x, w, Some(b))
    }
}

/// Convolutional GRU with 3×3 gates over `[x, h]`:
/// `z = σ(W_z∗[x,h])`, `r = σ(W_r∗[x,h])`, `ĥ = tanh(W_h∗[x, r⊙h])`,
/// `h' = (1−z)⊙h + z⊙ĥ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGru {
    pub update: Conv2dLayer,
    pub reset: Conv2dLayer,
    pub candidate: Conv2dLayer,
    pub hidden: usize,
}

impl ConvGru {
    pub fn new<T: Scalar>(params: &mut ParamSet<T>, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let spec = (input + hidden, hidden, 3, 1);
        Self {
            update: Conv2dLayer::new(params, &format!("{name}.update"), spec, true, rng),
            reset: Conv2dLayer::new(params, &format!("{name}.reset"), spec, true, rng),
            candidate: Conv2dLayer::new(params, &format!("{name}.candidate"), spec, true, rng),
            hidden,
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var, h: Var) -> Result<Var> {
        let (xs, hs) = (tape.value(x).shape(), tape.value(h).shape());
        if xs.len() != 3 || hs.len() != 3 || xs[1..] != hs[1..] || hs[0] != self.hidden {
            return Err(Error::Shape(format!("GRU input {xs:?} and state {hs:?}")));
        }
        gru_gates(tape, x, h, |t, v| self.update.forward(t, v), |t, v| self.reset.forward(t, v), |t, v| {
            self.candidate.forward(t, v)
        })
    }
}

/// Fully connected GRU, same gating as [`ConvGru`] on vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FcGru {
    pub update: LinearLayer,
    pub reset: LinearLayer,
    pub candidate: LinearLayer,
    pub hidden: usize,
}

impl FcGru {
    pub fn new<T: Scalar>(params: &mut ParamSet<T>, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let n = input + hidden;
        Self {
            update: LinearLayer::new(params, &format!("{name}.update"), n, hidden, rng),
            reset: LinearLayer::new(params, &format!("{name}.reset"), n, hidden, rng),
            candidate: LinearLayer::new(params, &format!("{name}.candidate"), n, hidden, rng),
            hidden,
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var, h: Var) -> Result<Var> {
        if tape.value(h).shape() != [self.hidden] || tape.value(x).shape().len() != 1 {
            return Err(Error::Shape(format!("FC GRU input {:?} and state {:?}", tape.value(x).shape(), tape.value(h).shape())));
        }
        gru_gates(tape, x, h, |t, v| self.update.forward(t, v), |t, v| self.reset.forward(t, v), |t, v| {
            self.candidate.forward(t, v)
        })
    }
}

fn gru_gates<'p, T: Scalar>(
    tape: &mut Tape<'p, T>,
    x: Var,
    h: Var,
    update: impl Fn(&mut Tape<'p, T>, Var) -> Result<Var>,
    reset: impl Fn(&mut Tape<'p, T>, Var) -> Result<Var>,
    candidate: impl Fn(&mut Tape<'p, T>, Var) -> Result<Var>,
) -> Result<Var> {
    let xh = tape.concat(x, h)?;
    let zp = update(tape, xh)?;
    let z = tape.sigmoid(zp);
    let rp = reset(tape, xh)?;
    let r = tape.sigmoid(rp);
    let rh = tape.mul(r, h)?;
    let xrh = tape.concat(x, rh)?;
    let cp = candidate(tape, xrh)?;
    let c = tape.tanh(cp);
    let keep = tape.one_minus(z);
    let a = tape.mul(keep, h)?;
    let b = tape.mul(z, c)?;
    tape.add(a, b)
}

/// Recurrent leaky integrate-and-fire layer with soft reset:
/// `v' = λv + W_in∗x + W_rec∗s − v_th·s`, `s' = H(v' − v_th)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifLayer {
    pub input: Conv2dLayer,
    pub recurrent: Conv2dLayer,
    pub leak: f64,
    pub threshold: f64,
    pub channels: usize,
}

impl LifLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar>(
        params: &mut ParamSet<T>,
        name: &str,
        input: usize,
        channels: usize,
        leak: f64,
        threshold: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if !(leak > 0.0 && leak < 1.0) {
            return Err(Error::Config(format!("LIF leak {leak} outside (0, 1)")));
        }
        if !(threshold > 0.0) {
            return Err(Error::Config(format!("LIF threshold {threshold} must be positive")));
        }
        Ok(Self {
            input: Conv2dLayer::new(params, &format!("{name}.input"), (input, channels, 3, 1), true, rng),
            recurrent: Conv2dLayer::new(params, &format!("{name}.recurrent"), (channels, channels, 3, 1), false, rng),
            leak,
            threshold,
            channels,
        })
    }

    /// Returns `(spikes, membrane)`.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var, v: Var, spikes: Var) -> Result<(Var, Var)> {
        let drive = self.input.forward(tape, x)?;
        let rec = self.recurrent.forward(tape, spikes)?;
        let leaked = tape.scale(v, T::lit(self.leak));
        let reset = tape.scale(spikes, T::lit(-self.threshold));
        let v_next = tape.add_n(&[leaked, drive, rec, reset])?;
        let s = tape.heaviside(v_next, T::lit(self.threshold));
        Ok((s, v_next))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gru_halves_state() {
        let mut p = ParamSet::<f64>::new();
        let gru = ConvGru::new(&mut p, "m", 2, 3, &mut ChaCha8Rng::seed_from_u64(0));
        p.zero_all();
        let mut tape = Tape::new(&p);
        let x = tape.input(Tensor::full(&[2, 4, 4], 0.7));
        let h = tape.input(Tensor::from_fn(&[3, 4, 4], |i| (i as f64 * 0.1).sin()));
        let h2 = gru.forward(&mut tape, x, h).unwrap();
        for (a, b) in tape.value(h2).data().iter().zip(tape.value(h).data()) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn lif_rejects_bad_leak() {
        let mut p = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(LifLayer::new(&mut p, "l", 1, 1, 1.0, 1.0, &mut rng).is_err());
        assert!(LifLayer::new(&mut p, "l2", 1, 1, 0.9, 1.0, &mut rng).is_ok());
    }
}
