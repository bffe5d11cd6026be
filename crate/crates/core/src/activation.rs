//! Elementwise nonlinearities.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    /// Pass-through; used for linear encoders in tests and diagnostics.
    Linear,
    /// x if x > 0 else alpha * (e^x - 1).
    Elu { alpha: f64 },
}

impl Activation {
    pub fn elu() -> Self {
        Activation::Elu { alpha: 1.0 }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        match *self {
            Activation::Linear => x.clone(),
            Activation::Elu { alpha } => elu(x, alpha),
        }
    }

    /// Derivative with respect to the pre-activation, elementwise.
    pub fn grad(&self, x: &Matrix) -> Matrix {
        match *self {
            Activation::Linear => x.map(|_| 1.0),
            Activation::Elu { alpha } => elu_grad(x, alpha),
        }
    }
}

pub fn elu(x: &Matrix, alpha: f64) -> Matrix {
    debug_assert!(alpha > 0.0);
    x.map(|v| if v > 0.0 { v } else { alpha * (v.exp() - 1.0) })
}

pub fn elu_grad(x: &Matrix, alpha: f64) -> Matrix {
    debug_assert!(alpha > 0.0);
    x.map(|v| if v > 0.0 { 1.0 } else { alpha * v.exp() })
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let z = x.exp();
        z / (1.0 + z)
    }
}

/// log(1 + e^x) without overflow for large |x|.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::finite_diff_grad;

    #[test]
    fn elu_zero_at_origin() {
        let x = Matrix::from_rows(&[vec![0.0]]).unwrap();
        assert_eq!(elu(&x, 1.0).get(0, 0), 0.0);
    }

    #[test]
    fn elu_saturates_at_minus_alpha() {
        let x = Matrix::from_rows(&[vec![-745.0]]).unwrap();
        let v = elu(&x, 1.3).get(0, 0);
        assert!((v + 1.3).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn elu_grad_matches_finite_difference() {
        for &point in &[-1.0, 0.5, 2.0] {
            let x = Matrix::from_rows(&[vec![point]]).unwrap();
            let analytic = elu_grad(&x, 1.0).get(0, 0);
            let numeric = finite_diff_grad(|m| elu(m, 1.0).get(0, 0), &x, 1e-5)
                .unwrap()
                .get(0, 0);
            assert!(
                (analytic - numeric).abs() < 1e-6,
                "at {point}: analytic {analytic} vs numeric {numeric}"
            );
        }
    }

    #[test]
    fn sigmoid_symmetry() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
    }
}
