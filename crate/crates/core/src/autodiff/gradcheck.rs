use super::{Tape, Tensor, Var};
use crate::error::{shape_err, Result};

/// Compares the reverse-mode gradient of a scalar function against central
/// finite differences. Returns the largest per-coordinate relative error
/// `|analytic − numeric| / max(1e-12, |analytic| + |numeric|)`.
pub fn finite_difference_check<F>(f: F, t: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let x = tape.param(t.clone());
    let y = f(&mut tape, x)?;
    if tape.value(y).len() != 1 {
        return shape_err(format!("function output has shape {:?}", tape.value(y).shape()));
    }
    let analytic = tape
        .backward(y)
        .take(x)
        .unwrap_or_else(|| Tensor::zeros(t.rows(), t.cols()));

    let eval = |probe: Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.param(probe);
        let y = f(&mut tape, x)?;
        Ok(tape.value(y).item())
    };

    let mut worst: f64 = 0.0;
    for j in 0..t.len() {
        let mut plus = t.clone();
        plus.data_mut()[j] += eps;
        let mut minus = t.clone();
        minus.data_mut()[j] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let a = analytic.data()[j];
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-12);
        worst = worst.max(err);
    }
    Ok(worst)
}
