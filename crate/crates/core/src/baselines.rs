//! Classical reference estimators sharing one output shape: a single linear
//! regression with treatment as a covariate, per-group linear regressions,
//! and counterfactual k-nearest-neighbor matching.

use serde::Serialize;

use crate::dataset::CausalDataset;
use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::matrix::{sq_dist, Matrix};

/// Predicted potential outcomes and effects for a batch of units.
/// `tau_hat` always equals `yhat1 - yhat0` elementwise by construction.
#[derive(Clone, Debug, Serialize)]
pub struct EstimatorOutput {
    pub name: String,
    pub tau_hat: Vec<f64>,
    pub yhat0: Vec<f64>,
    pub yhat1: Vec<f64>,
}

impl EstimatorOutput {
    pub fn new(name: impl Into<String>, yhat0: Vec<f64>, yhat1: Vec<f64>) -> Self {
        debug_assert_eq!(yhat0.len(), yhat1.len());
        let tau_hat = yhat1.iter().zip(yhat0.iter()).map(|(a, b)| a - b).collect();
        EstimatorOutput {
            name: name.into(),
            tau_hat,
            yhat0,
            yhat1,
        }
    }
}

const RIDGE_FALLBACK: f64 = 1e-6;

fn lstsq_with_fallback(x: &Matrix, y: &[f64], what: &str) -> Result<Vec<f64>> {
    match lstsq(x, y, 0.0) {
        Ok(beta) => Ok(beta),
        Err(_) => {
            eprintln!("notice: {what} design is rank-deficient; refitting with ridge {RIDGE_FALLBACK}");
            lstsq(x, y, RIDGE_FALLBACK)
        }
    }
}

/// Single linear regression of the outcome on covariates, treatment, and an
/// intercept; the effect estimate is the treatment coefficient, constant
/// across units.
pub fn ols1(train: &CausalDataset, eval_x: &Matrix) -> Result<EstimatorOutput> {
    if eval_x.cols() != train.dim() {
        return Err(Error::shape(
            "ols1",
            format!("{} vs {} covariates", eval_x.cols(), train.dim()),
        ));
    }
    let d = train.dim();
    let design = Matrix::from_fn(train.n(), d + 2, |i, j| {
        if j < d {
            train.x.get(i, j)
        } else if j == d {
            train.t[i] as f64
        } else {
            1.0
        }
    });
    let beta = lstsq_with_fallback(&design, &train.y, "ols1")?;
    let effect = beta[d];
    let intercept = beta[d + 1];
    let yhat0: Vec<f64> = (0..eval_x.rows())
        .map(|i| {
            eval_x
                .row(i)
                .iter()
                .zip(beta.iter())
                .map(|(&a, &b)| a * b)
                .sum::<f64>()
                + intercept
        })
        .collect();
    let yhat1 = yhat0.iter().map(|v| v + effect).collect();
    Ok(EstimatorOutput::new("ols1", yhat0, yhat1))
}

/// Separate linear regressions per treatment group; the effect estimate is
/// the difference of the two fitted surfaces.
pub fn ols2(train: &CausalDataset, eval_x: &Matrix) -> Result<EstimatorOutput> {
    if eval_x.cols() != train.dim() {
        return Err(Error::shape(
            "ols2",
            format!("{} vs {} covariates", eval_x.cols(), train.dim()),
        ));
    }
    let d = train.dim();
    let mut fits: Vec<Vec<f64>> = Vec::with_capacity(2);
    for group in 0..2u8 {
        let rows: Vec<usize> = (0..train.n()).filter(|&i| train.t[i] == group).collect();
        let design = Matrix::from_fn(rows.len(), d + 1, |r, j| {
            if j < d {
                train.x.get(rows[r], j)
            } else {
                1.0
            }
        });
        let y: Vec<f64> = rows.iter().map(|&i| train.y[i]).collect();
        fits.push(lstsq_with_fallback(&design, &y, "ols2")?);
    }
    let apply = |beta: &[f64]| -> Vec<f64> {
        (0..eval_x.rows())
            .map(|i| {
                eval_x
                    .row(i)
                    .iter()
                    .zip(beta.iter())
                    .map(|(&a, &b)| a * b)
                    .sum::<f64>()
                    + beta[d]
            })
            .collect()
    };
    Ok(EstimatorOutput::new("ols2", apply(&fits[0]), apply(&fits[1])))
}

/// Mean factual outcome of the k nearest training units of `group` in
/// covariate space. Ties break toward smaller training indices.
fn knn_mean(train: &CausalDataset, group: u8, point: &[f64], k: usize) -> f64 {
    let mut dists: Vec<(f64, usize)> = (0..train.n())
        .filter(|&i| train.t[i] == group)
        .map(|i| (sq_dist(train.x.row(i), point), i))
        .collect();
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let take = k.min(dists.len());
    dists[..take].iter().map(|&(_, i)| train.y[i]).sum::<f64>() / take as f64
}

/// Counterfactual k-nearest-neighbor matching. The counterfactual arm is
/// imputed from the k nearest opposite-group training units. When the
/// evaluated units' own treatments and outcomes are supplied (within-sample
/// evaluation), the factual arm uses the observed outcome; otherwise both
/// arms are imputed from the training set.
pub fn knn(
    train: &CausalDataset,
    eval_x: &Matrix,
    observed: Option<(&[u8], &[f64])>,
    k: usize,
) -> Result<EstimatorOutput> {
    if eval_x.cols() != train.dim() {
        return Err(Error::shape(
            "knn",
            format!("{} vs {} covariates", eval_x.cols(), train.dim()),
        ));
    }
    if k == 0 {
        return Err(Error::Config("knn needs k >= 1".to_string()));
    }
    let (n0, n1) = train.group_sizes();
    if k > n0 || k > n1 {
        return Err(Error::Config(format!(
            "k={k} exceeds a training group size (control={n0}, treated={n1})"
        )));
    }
    if let Some((t, y)) = observed {
        if t.len() != eval_x.rows() || y.len() != eval_x.rows() {
            return Err(Error::shape(
                "knn",
                format!("{} observed rows vs {} eval rows", t.len(), eval_x.rows()),
            ));
        }
    }

    let n = eval_x.rows();
    let mut yhat0 = Vec::with_capacity(n);
    let mut yhat1 = Vec::with_capacity(n);
    for i in 0..n {
        let point = eval_x.row(i);
        match observed {
            Some((t, y)) => {
                if t[i] == 1 {
                    yhat1.push(y[i]);
                    yhat0.push(knn_mean(train, 0, point, k));
                } else {
                    yhat0.push(y[i]);
                    yhat1.push(knn_mean(train, 1, point, k));
                }
            }
            None => {
                yhat0.push(knn_mean(train, 0, point, k));
                yhat1.push(knn_mean(train, 1, point, k));
            }
        }
    }
    Ok(EstimatorOutput::new("knn", yhat0, yhat1))
}
