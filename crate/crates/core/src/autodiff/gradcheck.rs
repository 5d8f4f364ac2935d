use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{Gradients, ParamSet};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Denominator floor of the relative error, so that two vanishing
    /// gradients do not register as a large relative mismatch.
    pub floor: f64,
    /// Check at most this many randomly chosen elements per tensor.
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-5, floor: 1e-6, max_per_tensor: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Location of the worst element, e.g. `param conv.weight[17]`.
    pub worst: String,
    pub checked: usize,
}

/// Compares reverse-mode gradients with central differences. `f` builds the
/// graph from the inputs; a non-scalar output is reduced with fixed random
/// weights. Parameters are checked when `param_filter` accepts their name,
/// inputs when `check_inputs` is set.
pub fn grad_check<F>(
    params: &ParamSet<f64>,
    inputs: &[Tensor<f64>],
    check_inputs: bool,
    param_filter: impl Fn(&str) -> bool,
    f: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_, f64>, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut weights: Option<Vec<f64>> = None;
    let mut eval = |p: &ParamSet<f64>, xs: &[Tensor<f64>], grads: Option<&mut Gradients<f64>>| -> Result<(f64, Vec<Option<Tensor<f64>>>)> {
        let mut tape = Tape::new(p);
        let vars: Vec<Var> = xs.iter().map(|x| tape.input(x.clone())).collect();
        let y = f(&mut tape, &vars)?;
        let loss = if tape.value(y).len() == 1 {
            y
        } else {
            let n = tape.value(y).len();
            let w = weights.get_or_insert_with(|| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).clone();
            tape.weighted_sum(y, w)?
        };
        let value = tape.value(loss).item();
        let mut input_grads = Vec::new();
        if let Some(g) = grads {
            let ng = tape.backward(loss, g)?;
            input_grads = vars.iter().map(|&v| ng.get(v).cloned()).collect();
        }
        Ok((value, input_grads))
    };

    let mut analytic = Gradients::zeros_like(params);
    let (_, input_grads) = eval(params, inputs, Some(&mut analytic))?;
    if !analytic.is_finite() {
        return Err(Error::Numeric("non-finite analytic gradient".into()));
    }
    let mut pick_rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9);
    let mut pick = |n: usize| -> Vec<usize> {
        match opts.max_per_tensor {
            Some(m) if m < n => {
                let mut v = sample(&mut pick_rng, n, m).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        }
    };
    let h = opts.step;
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: String::new(), checked: 0 };
    let record = |a: f64, n: f64, at: String, report: &mut GradCheckReport| {
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(opts.floor);
        report.checked += 1;
        if rel > report.max_rel_error || report.worst.is_empty() {
            report.max_rel_error = rel.max(report.max_rel_error);
            report.worst = at;
        }
    };

    let mut work = params.clone();
    for id in params.ids() {
        if !param_filter(params.name(id)) {
            continue;
        }
        for k in pick(params.get(id).len()) {
            let orig = params.get(id).data()[k];
            work.get_mut(id).data_mut()[k] = orig + h;
            let (lp, _) = eval(&work, inputs, None)?;
            work.get_mut(id).data_mut()[k] = orig - h;
            let (lm, _) = eval(&work, inputs, None)?;
            work.get_mut(id).data_mut()[k] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            record(analytic.get(id).data()[k], numeric, format!("param {}[{k}]", params.name(id)), &mut report);
        }
    }
    if check_inputs {
        let mut xs = inputs.to_vec();
        for i in 0..xs.len() {
            for k in pick(xs[i].len()) {
                let orig = xs[i].data()[k];
                xs[i].data_mut()[k] = orig + h;
                let (lp, _) = eval(params, &xs, None)?;
                xs[i].data_mut()[k] = orig - h;
                let (lm, _) = eval(params, &xs, None)?;
                xs[i].data_mut()[k] = orig;
                let numeric = (lp - lm) / (2.0 * h);
                let a = input_grads[i].as_ref().map_or(0.0, |g| g.data()[k]);
                record(a, numeric, format!("input {i}[{k}]"), &mut report);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_zero_error() {
        let p = ParamSet::new();
        let x = Tensor::from_fn(&[5], |i| i as f64 - 2.0);
        let r = grad_check(&p, &[x], true, |_| true, |_, v| Ok(v[0]), &GradCheckOptions::default()).unwrap();
        assert_eq!(r.checked, 5);
        assert!(r.max_rel_error < 1e-9, "{r:?}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // Heaviside has a surrogate backward that differs from its true
        // (zero almost everywhere) derivative.
        let p = ParamSet::new();
        let x = Tensor::from_fn(&[3], |i| 0.3 * i as f64 + 0.1);
        let r = grad_check(&p, &[x], true, |_| true, |t, v| Ok(t.heaviside(v[0], 0.0)), &GradCheckOptions::default())
            .unwrap();
        assert!(r.max_rel_error > 0.5);
    }
}
