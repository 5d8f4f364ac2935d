//! Reverse-mode recording of one forward pass.

use super::params::{Gradients, ParamId, ParamSet};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Param(ParamId),
    Conv2d { x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize, cols: Vec<T> },
    Linear { x: Var, w: Var, b: Option<Var> },
    Elu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Heaviside { x: Var, threshold: T },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    OneMinus(Var),
    Concat(Var, Var),
    Broadcast(Var),
    GlobalAvgPool(Var),
    WeightedMse { a: Var, b: Var, weights: Vec<T> },
    WeightedSum { x: Var, weights: Vec<T> },
    AddN(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Option<Tensor<T>>,
    op: Op<T>,
}

/// Ordered record of operations. Parameters are borrowed, not copied; their
/// gradients are accumulated into a separate [`Gradients`] buffer so several
/// tapes over the same parameters can run independently.
#[derive(Debug)]
pub struct Tape<'p, T> {
    params: &'p ParamSet<T>,
    nodes: Vec<Node<T>>,
    param_vars: Vec<Option<Var>>,
    record: bool,
}

/// Triangular surrogate derivative of the unit step, peak 1 at the
/// threshold and zero beyond a distance of 1.
pub fn surrogate_derivative<T: Scalar>(u: T) -> T {
    (T::one() - u.abs()).max(T::zero())
}

pub fn elu<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        x
    } else {
        x.exp_m1()
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Unit step with `H(0) = 1`.
pub fn heaviside<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

fn conv_out(n: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    (n + 2 * pad).checked_sub(k).map(|d| d / stride + 1)
}

#[allow(clippy::too_many_arguments)]
fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize, ho: usize, wo: usize) -> Vec<T> {
    let n = ho * wo;
    let mut cols = vec![T::zero(); c * k * k * n];
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = &mut cols[((ci * k + ki) * k + kj) * n..][..n];
                for oy in 0..ho {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &x[(ci * h + iy as usize) * w..][..w];
                    let dst = &mut row[oy * wo..][..wo];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            *d = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

#[allow(clippy::too_many_arguments)]
fn col2im<T: Scalar>(cols: &[T], dx: &mut [T], c: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize, ho: usize, wo: usize) {
    let n = ho * wo;
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = &cols[((ci * k + ki) * k + kj) * n..][..n];
                for oy in 0..ho {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut dx[(ci * h + iy as usize) * w..][..w];
                    for (ox, &g) in row[oy * wo..][..wo].iter().enumerate() {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += g;
                        }
                    }
                }
            }
        }
    }
}

impl<'p, T: Scalar> Tape<'p, T> {
    /// Tape that records everything needed for [`Tape::backward`].
    pub fn new(params: &'p ParamSet<T>) -> Self {
        Self { params, nodes: Vec::new(), param_vars: vec![None; params.len()], record: true }
    }

    /// Forward-only tape; convolution buffers are not kept and
    /// [`Tape::backward`] is refused.
    pub fn inference(params: &'p ParamSet<T>) -> Self {
        Self { record: false, ..Self::new(params) }
    }

    pub fn params(&self) -> &'p ParamSet<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        match &self.nodes[v.0] {
            Node { value: Some(t), .. } => t,
            Node { op: Op::Param(id), .. } => self.params.get(*id),
            _ => unreachable!("every non-parameter node stores its value"),
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value: Some(value), op });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node { value: None, op: Op::Param(id) });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    /// Copy of `v` as a new leaf: later gradients stop here. This is how
    /// truncated backpropagation cuts the recurrent state between windows.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.value(v).clone();
        self.input(t)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let (xs, ws) = (self.value(x).shape(), self.value(w).shape());
        if xs.len() != 3 || ws.len() != 4 || ws[1] != xs[0] || ws[2] != ws[3] || stride == 0 {
            return Err(Error::Shape(format!("conv2d input {xs:?} with kernel {ws:?}, stride {stride}")));
        }
        let (c, h, wd, o, k) = (xs[0], xs[1], xs[2], ws[0], ws[2]);
        if let Some(b) = b {
            if self.value(b).shape() != [o] {
                return Err(Error::Shape(format!("conv2d bias {:?} for {o} outputs", self.value(b).shape())));
            }
        }
        let (Some(ho), Some(wo)) = (conv_out(h, k, stride, pad), conv_out(wd, k, stride, pad)) else {
            return Err(Error::Shape(format!("kernel {k} larger than padded input {h}x{wd}")));
        };
        let n = ho * wo;
        let cols = im2col(self.value(x).data(), c, h, wd, k, stride, pad, ho, wo);
        let mut out = vec![T::zero(); o * n];
        if let Some(b) = b {
            for (oc, &bv) in self.value(b).data().iter().enumerate() {
                out[oc * n..(oc + 1) * n].fill(bv);
            }
        }
        let ckk = c * k * k;
        T::gemm(o, ckk, n, T::one(), (self.value(w).data(), ckk as isize, 1), (&cols, n as isize, 1), T::one(), (&mut out, n as isize, 1));
        let cols = if self.record { cols } else { Vec::new() };
        Ok(self.push(Tensor::new(&[o, ho, wo], out)?, Op::Conv2d { x, w, b, stride, pad, cols }))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xs, ws) = (self.value(x).shape(), self.value(w).shape());
        if xs.len() != 1 || ws.len() != 2 || ws[1] != xs[0] {
            return Err(Error::Shape(format!("linear input {xs:?} with weight {ws:?}")));
        }
        let (m, n) = (ws[0], ws[1]);
        let mut out = match b {
            Some(b) if self.value(b).shape() == [m] => self.value(b).data().to_vec(),
            Some(b) => return Err(Error::Shape(format!("linear bias {:?} for {m} outputs", self.value(b).shape()))),
            None => vec![T::zero(); m],
        };
        let (wv, xv) = (self.value(w).data(), self.value(x).data());
        for (i, o) in out.iter_mut().enumerate() {
            *o += wv[i * n..(i + 1) * n].iter().zip(xv).map(|(&a, &b)| a * b).sum::<T>();
        }
        Ok(self.push(Tensor::new(&[m], out)?, Op::Linear { x, w, b }))
    }

    fn unary(&mut self, x: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let y = self.value(x).map(f);
        self.push(y, op)
    }

    pub fn elu(&mut self, x: Var) -> Var {
        self.unary(x, elu, Op::Elu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, T::tanh, Op::Tanh(x))
    }

    /// `H(x − threshold)` forward, triangular surrogate backward.
    pub fn heaviside(&mut self, x: Var, threshold: T) -> Var {
        self.unary(x, |v| heaviside(v - threshold), Op::Heaviside { x, threshold })
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        self.unary(x, |v| v * s, Op::Scale(x, s))
    }

    /// `1 − x`.
    pub fn one_minus(&mut self, x: Var) -> Var {
        self.unary(x, |v| T::one() - v, Op::OneMinus(x))
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        let y = self.value(a).zip_map(self.value(b), f)?;
        Ok(self.push(y, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn add_n(&mut self, vars: &[Var]) -> Result<Var> {
        let (&first, rest) = vars.split_first().ok_or_else(|| Error::Shape("add_n of nothing".into()))?;
        let mut acc = self.value(first).clone();
        for &v in rest {
            acc.check_same(self.value(v))?;
            acc.add_assign(self.value(v));
        }
        Ok(self.push(acc, Op::AddN(vars.to_vec())))
    }

    /// Concatenation along the leading (channel) axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.is_empty() || sa.len() != sb.len() || sa[1..] != sb[1..] {
            return Err(Error::Shape(format!("cannot concatenate {sa:?} and {sb:?}")));
        }
        let mut shape = sa.to_vec();
        shape[0] += sb[0];
        let mut data = self.value(a).data().to_vec();
        data.extend_from_slice(self.value(b).data());
        Ok(self.push(Tensor::new(&shape, data)?, Op::Concat(a, b)))
    }

    /// Repeats a `[C]` vector over an `h×w` grid, giving `[C, h, w]`.
    pub fn broadcast_spatial(&mut self, x: Var, h: usize, w: usize) -> Result<Var> {
        let s = self.value(x).shape();
        if s.len() != 1 {
            return Err(Error::Shape(format!("broadcast expects a vector, got {s:?}")));
        }
        let c = s[0];
        let src = self.value(x).data();
        let data = (0..c * h * w).map(|i| src[i / (h * w)]).collect();
        Ok(self.push(Tensor::new(&[c, h, w], data)?, Op::Broadcast(x)))
    }

    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).shape();
        if s.len() != 3 {
            return Err(Error::Shape(format!("pooling expects C×H×W, got {s:?}")));
        }
        let (c, hw) = (s[0], s[1] * s[2]);
        let inv = T::one() / T::lit(hw as f64);
        let d = self.value(x).data();
        let data = (0..c).map(|i| d[i * hw..(i + 1) * hw].iter().copied().sum::<T>() * inv).collect();
        Ok(self.push(Tensor::new(&[c], data)?, Op::GlobalAvgPool(x)))
    }

    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let n = self.value(a).len();
        self.weighted_mse(a, b, vec![T::one(); n])
    }

    /// `Σ wᵢ(aᵢ − bᵢ)² / n`.
    pub fn weighted_mse(&mut self, a: Var, b: Var, weights: Vec<T>) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        ta.check_same(tb)?;
        if weights.len() != ta.len() || ta.is_empty() {
            return Err(Error::Shape(format!("{} weights for {} values", weights.len(), ta.len())));
        }
        let inv = T::one() / T::lit(ta.len() as f64);
        let s = ta.data().iter().zip(tb.data()).zip(&weights).map(|((&x, &y), &w)| w * (x - y) * (x - y)).sum::<T>() * inv;
        Ok(self.push(Tensor::scalar(s), Op::WeightedMse { a, b, weights }))
    }

    /// `Σ wᵢxᵢ`, a scalar projection.
    pub fn weighted_sum(&mut self, x: Var, weights: Vec<T>) -> Result<Var> {
        let t = self.value(x);
        if weights.len() != t.len() {
            return Err(Error::Shape(format!("{} weights for {} values", weights.len(), t.len())));
        }
        let s = t.data().iter().zip(&weights).map(|(&a, &b)| a * b).sum::<T>();
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum { x, weights }))
    }

    /// Back-propagates from the scalar `loss`. Parameter gradients are added
    /// into `grads`; the returned table holds gradients of every node.
    pub fn backward(&self, loss: Var, grads: &mut Gradients<T>) -> Result<NodeGrads<T>> {
        if !self.record {
            return Err(Error::Numeric("backward on an inference tape".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Shape(format!("loss must be scalar, got {:?}", self.value(loss).shape())));
        }
        let mut g: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        g[loss.0] = Some(Tensor::full(self.value(loss).shape(), T::one()));
        for i in (0..=loss.0).rev() {
            let Some(dy) = g[i].take() else { continue };
            self.backprop_node(i, &dy, &mut g)?;
            g[i] = Some(dy);
        }
        for (pid, v) in self.param_vars.iter().enumerate() {
            if let Some(v) = v {
                if let Some(t) = &g[v.0] {
                    grads.tensors[pid].add_assign(t);
                }
            }
        }
        Ok(NodeGrads { grads: g })
    }

    fn backprop_node(&self, i: usize, dy: &Tensor<T>, g: &mut [Option<Tensor<T>>]) -> Result<()> {
        let y = self.nodes[i].value.as_ref();
        let dyd = dy.data();
        match &self.nodes[i].op {
            Op::Leaf | Op::Param(_) => {}
            Op::Elu(x) => {
                let yv = y.expect("stored").data();
                let xv = self.value(*x).data();
                let gx = acc(g, *x, self.value(*x));
                for k in 0..gx.len() {
                    gx[k] += dyd[k] * if xv[k] >= T::zero() { T::one() } else { yv[k] + T::one() };
                }
            }
            Op::Sigmoid(x) => {
                let yv = y.expect("stored").data();
                let gx = acc(g, *x, self.value(*x));
                for k in 0..gx.len() {
                    gx[k] += dyd[k] * yv[k] * (T::one() - yv[k]);
                }
            }
            Op::Tanh(x) => {
                let yv = y.expect("stored").data();
                let gx = acc(g, *x, self.value(*x));
                for k in 0..gx.len() {
                    gx[k] += dyd[k] * (T::one() - yv[k] * yv[k]);
                }
            }
            Op::Heaviside { x, threshold } => {
                let xv = self.value(*x).data();
                let gx = acc(g, *x, self.value(*x));
                for k in 0..gx.len() {
                    gx[k] += dyd[k] * surrogate_derivative(xv[k] - *threshold);
                }
            }
            Op::Scale(x, s) => {
                let gx = acc(g, *x, self.value(*x));
                gx.iter_mut().zip(dyd).for_each(|(a, &d)| *a += d * *s);
            }
            Op::OneMinus(x) => {
                let gx = acc(g, *x, self.value(*x));
                gx.iter_mut().zip(dyd).for_each(|(a, &d)| *a -= d);
            }
            Op::Add(a, b) => {
                acc(g, *a, self.value(*a)).iter_mut().zip(dyd).for_each(|(s, &d)| *s += d);
                acc(g, *b, self.value(*b)).iter_mut().zip(dyd).for_each(|(s, &d)| *s += d);
            }
            Op::Sub(a, b) => {
                acc(g, *a, self.value(*a)).iter_mut().zip(dyd).for_each(|(s, &d)| *s += d);
                acc(g, *b, self.value(*b)).iter_mut().zip(dyd).for_each(|(s, &d)| *s -= d);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                let ga = acc(g, *a, self.value(*a));
                for k in 0..ga.len() {
                    ga[k] += dyd[k] * bv[k];
                }
                let gb = acc(g, *b, self.value(*b));
                for k in 0..gb.len() {
                    gb[k] += dyd[k] * av[k];
                }
            }
            Op::AddN(vs) => {
                for v in vs {
                    acc(g, *v, self.value(*v)).iter_mut().zip(dyd).for_each(|(s, &d)| *s += d);
                }
            }
            Op::Concat(a, b) => {
                let na = self.value(*a).len();
                acc(g, *a, self.value(*a)).iter_mut().zip(&dyd[..na]).for_each(|(s, &d)| *s += d);
                acc(g, *b, self.value(*b)).iter_mut().zip(&dyd[na..]).for_each(|(s, &d)| *s += d);
            }
            Op::Broadcast(x) => {
                let c = self.value(*x).len();
                let hw = dyd.len() / c;
                let gx = acc(g, *x, self.value(*x));
                for (k, s) in gx.iter_mut().enumerate() {
                    *s += dyd[k * hw..(k + 1) * hw].iter().copied().sum::<T>();
                }
            }
            Op::GlobalAvgPool(x) => {
                let c = dyd.len();
                let hw = self.value(*x).len() / c;
                let inv = T::one() / T::lit(hw as f64);
                let gx = acc(g, *x, self.value(*x));
                for k in 0..c {
                    let d = dyd[k] * inv;
                    gx[k * hw..(k + 1) * hw].iter_mut().for_each(|s| *s += d);
                }
            }
            Op::WeightedMse { a, b, weights } => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                let f = dyd[0] * T::lit(2.0) / T::lit(av.len() as f64);
                let diff: Vec<T> = av.iter().zip(bv).zip(weights).map(|((&x, &y), &w)| f * w * (x - y)).collect();
                acc(g, *a, self.value(*a)).iter_mut().zip(&diff).for_each(|(s, &d)| *s += d);
                acc(g, *b, self.value(*b)).iter_mut().zip(&diff).for_each(|(s, &d)| *s -= d);
            }
            Op::WeightedSum { x, weights } => {
                let gx = acc(g, *x, self.value(*x));
                gx.iter_mut().zip(weights).for_each(|(s, &w)| *s += dyd[0] * w);
            }
            Op::Linear { x, w, b } => {
                let (m, n) = (dyd.len(), self.value(*x).len());
                let (wv, xv) = (self.value(*w).data(), self.value(*x).data());
                let gw = acc(g, *w, self.value(*w));
                for r in 0..m {
                    for c in 0..n {
                        gw[r * n + c] += dyd[r] * xv[c];
                    }
                }
                let gx = acc(g, *x, self.value(*x));
                for r in 0..m {
                    for c in 0..n {
                        gx[c] += wv[r * n + c] * dyd[r];
                    }
                }
                if let Some(b) = b {
                    acc(g, *b, self.value(*b)).iter_mut().zip(dyd).for_each(|(s, &d)| *s += d);
                }
            }
            Op::Conv2d { x, w, b, stride, pad, cols } => {
                let xs = self.value(*x).shape().to_vec();
                let ws = self.value(*w).shape().to_vec();
                let ys = dy.shape();
                let (c, h, wd, o, k) = (xs[0], xs[1], xs[2], ws[0], ws[2]);
                let (ho, wo) = (ys[1], ys[2]);
                let (n, ckk) = (ho * wo, c * k * k);
                let gw = acc(g, *w, self.value(*w));
                T::gemm(o, n, ckk, T::one(), (dyd, n as isize, 1), (cols, 1, n as isize), T::one(), (gw, ckk as isize, 1));
                if let Some(b) = b {
                    let gb = acc(g, *b, self.value(*b));
                    for (oc, s) in gb.iter_mut().enumerate() {
                        *s += dyd[oc * n..(oc + 1) * n].iter().copied().sum::<T>();
                    }
                }
                let mut dcols = vec![T::zero(); ckk * n];
                T::gemm(ckk, o, n, T::one(), (self.value(*w).data(), 1, ckk as isize), (dyd, n as isize, 1), T::zero(), (&mut dcols, n as isize, 1));
                let gx = acc(g, *x, self.value(*x));
                col2im(&dcols, gx, c, h, wd, k, *stride, *pad, ho, wo);
            }
        }
        Ok(())
    }
}

fn acc<'a, T: Scalar>(g: &'a mut [Option<Tensor<T>>], v: Var, like: &Tensor<T>) -> &'a mut [T] {
    g[v.0].get_or_insert_with(|| Tensor::zeros(like.shape())).data_mut()
}

/// Gradient of the loss with respect to every recorded node.
#[derive(Debug, Clone)]
pub struct NodeGrads<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> NodeGrads<T> {
    /// `None` when the loss does not depend on `v`.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}
