//! Central finite-difference gradient oracle.
//!
//! Every hand-derived gradient in this crate is validated against this
//! module in tests; it never feeds the training path itself.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Central-difference gradient estimate of a scalar function of a matrix:
/// entry (i, j) is (f(x + h e_ij) - f(x - h e_ij)) / (2h).
pub fn finite_diff_grad<F>(mut f: F, at: &Matrix, h: f64) -> Result<Matrix>
where
    F: FnMut(&Matrix) -> f64,
{
    if h <= 0.0 {
        return Err(Error::Config(format!("finite difference step must be positive, got {h}")));
    }
    let mut grad = Matrix::zeros(at.rows(), at.cols());
    let mut probe = at.clone();
    for i in 0..at.rows() {
        for j in 0..at.cols() {
            let orig = probe.get(i, j);
            probe.set(i, j, orig + h);
            let plus = f(&probe);
            probe.set(i, j, orig - h);
            let minus = f(&probe);
            probe.set(i, j, orig);
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "function evaluated non-finite near entry ({i}, {j})"
                )));
            }
            grad.set(i, j, (plus - minus) / (2.0 * h));
        }
    }
    Ok(grad)
}

/// Largest entrywise relative error between two gradients, with the usual
/// |a| + |b| denominator guard so near-zero entries do not blow up.
pub fn max_rel_err(analytic: &Matrix, numeric: &Matrix) -> f64 {
    debug_assert_eq!(analytic.shape(), numeric.shape());
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.data().iter().zip(numeric.data().iter()) {
        let denom = (a.abs() + n.abs()).max(1e-8);
        worst = worst.max((a - n).abs() / denom);
    }
    worst
}
