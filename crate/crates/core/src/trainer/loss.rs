use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Weight on the attitude term relative to the rate term.
pub const ATTITUDE_WEIGHT: f64 = 10.0;

/// `10·MSE(attitude) + MSE(rate)` with predictions in degrees and deg/s
/// and targets in rad and rad/s.
pub fn loss(pred_deg: &[[f64; 4]], target_rad: &[[f64; 4]]) -> Result<f64> {
    if pred_deg.len() != target_rad.len() || pred_deg.is_empty() {
        return Err(Error::Shape(format!("{} predictions for {} targets", pred_deg.len(), target_rad.len())));
    }
    let (mut att, mut rate) = (0.0, 0.0);
    for (p, t) in pred_deg.iter().zip(target_rad) {
        let d = [0, 1, 2, 3].map(|c| p[c] - t[c].to_degrees());
        att += d[0] * d[0] + d[1] * d[1];
        rate += d[2] * d[2] + d[3] * d[3];
    }
    let n = 2.0 * pred_deg.len() as f64;
    Ok(ATTITUDE_WEIGHT * att / n + rate / n)
}

/// The same loss on a tape, for `outputs` of shape `[4]` each.
pub fn tape_loss<T: Scalar>(tape: &mut Tape<'_, T>, outputs: &[Var], target_rad: &[[f64; 4]]) -> Result<Var> {
    if outputs.len() != target_rad.len() || outputs.is_empty() {
        return Err(Error::Shape(format!("{} outputs for {} targets", outputs.len(), target_rad.len())));
    }
    // weighted_mse divides by the 4 entries of a step; the weights restore
    // a mean over 2n entries per term.
    let n = T::lit(outputs.len() as f64);
    let weights: Vec<T> = [2.0 * ATTITUDE_WEIGHT, 2.0 * ATTITUDE_WEIGHT, 2.0, 2.0].map(|w| T::lit(w) / n).to_vec();
    let mut terms = Vec::with_capacity(outputs.len());
    for (&out, t) in outputs.iter().zip(target_rad) {
        let target = tape.input(Tensor::new(&[4], t.map(|v| T::lit(v.to_degrees())).to_vec())?);
        terms.push(tape.weighted_mse(out, target, weights.clone())?);
    }
    tape.add_n(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamSet;

    #[test]
    fn golden_values() {
        let zero = [[0.0; 4]; 3];
        assert_eq!(loss(&zero, &zero).unwrap(), 0.0);
        let att = [[1.0, -1.0, 0.0, 0.0]; 3];
        assert!((loss(&att, &zero).unwrap() - 10.0).abs() < 1e-12);
        let rate = [[0.0, 0.0, 1.0, 1.0]; 3];
        assert!((loss(&rate, &zero).unwrap() - 1.0).abs() < 1e-12);
        assert!(loss(&zero[..2], &zero).is_err());
    }

    #[test]
    fn tape_matches_plain() {
        let params = ParamSet::<f64>::new();
        let mut tape = Tape::new(&params);
        let preds = [[1.0, 2.0, -3.0, 0.5], [0.0, 0.1, 7.0, -2.0]];
        let targets = [[0.01, -0.02, 0.3, 0.0], [0.0, 0.0, 0.1, 0.2]];
        let outs: Vec<Var> = preds.iter().map(|p| tape.input(Tensor::new(&[4], p.to_vec()).unwrap())).collect();
        let l = tape_loss(&mut tape, &outs, &targets).unwrap();
        let want = loss(&preds, &targets).unwrap();
        assert!((tape.value(l).item() - want).abs() < 1e-12 * want);
    }
}
