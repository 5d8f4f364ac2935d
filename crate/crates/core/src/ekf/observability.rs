use nalgebra::DMatrix;

use super::filter::{model_derivative, predict_flow, FilterMode};
use crate::error::Result;

/// Stacked gradients of the Lie derivatives of the flow measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Observability {
    pub matrix: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub tolerance: f64,
}

impl Observability {
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.matrix.ncols()
    }
}

const LIE_STEP: f64 = 1e-4;
const GRAD_STEP: f64 = 1e-4;

fn lie(mode: FilterMode, x: &[f64], input: f64, inertia: f64, order: usize) -> Result<f64> {
    if order == 0 {
        return predict_flow(mode, x, input);
    }
    let f = model_derivative(mode, x, input, inertia)?;
    let shifted = |s: f64| -> Vec<f64> { x.iter().zip(&f).map(|(a, d)| a + s * LIE_STEP * d).collect() };
    // Fourth-order central difference of L_{k−1} along f.
    let l = |s: f64| lie(mode, &shifted(s), input, inertia, order - 1);
    Ok((8.0 * (l(1.0)? - l(-1.0)?) - (l(2.0)? - l(-2.0)?)) / (12.0 * LIE_STEP))
}

/// Observability matrix rows `∇L_f^k h` for `k = 0..n−1`, all by nested
/// numerical differentiation, with the rank taken from singular values above
/// `1e-8·σ_max`.
pub fn observability_matrix(mode: FilterMode, x: &[f64], input: f64, inertia: f64) -> Result<Observability> {
    let n = mode.dim();
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        for i in 0..n {
            let at = |s: f64| {
                let mut y = x.to_vec();
                y[i] += s * GRAD_STEP;
                lie(mode, &y, input, inertia, k)
            };
            m[(k, i)] = (8.0 * (at(1.0)? - at(-1.0)?) - (at(2.0)? - at(-2.0)?)) / (12.0 * GRAD_STEP);
        }
    }
    let sv = m.clone().svd(false, false).singular_values;
    let mut singular_values: Vec<f64> = sv.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let tolerance = 1e-8 * singular_values[0];
    let rank = singular_values.iter().filter(|&&s| s > tolerance).count();
    Ok(Observability { matrix: m, singular_values, rank, tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_deficient_at_rest_full_when_excited() {
        let rest = observability_matrix(FilterMode::Planar, &[0.0, 0.0, 1.0], 0.0, 0.0035).unwrap();
        assert!(rest.rank < 3, "{:?}", rest.singular_values);
        let excited = observability_matrix(FilterMode::Planar, &[1.0, 0.2, 1.0], 0.3, 0.0035).unwrap();
        assert_eq!(excited.rank, 3, "{:?}", excited.singular_values);
    }

    #[test]
    fn first_row_matches_measurement_jacobian() {
        let x = [0.5, 0.1, 1.3];
        let o = observability_matrix(FilterMode::Planar, &x, 0.2, 0.0035).unwrap();
        let h = super::super::filter::measurement_jacobian(FilterMode::Planar, &x);
        for i in 0..3 {
            assert!((o.matrix[(0, i)] - h[i]).abs() < 1e-9);
        }
    }
}
