//! Evaluation metrics: effect-recovery errors for datasets with ground
//! truth, policy-value metrics for randomized binary-outcome data, and the
//! hypersphere uniformity diagnostic for representations.

use serde::{Deserialize, Serialize};

use crate::dataset::CausalDataset;
use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};

/// Mean squared difference between true and estimated effects. Callers
/// report the square root.
pub fn pehe(tau_true: &[f64], tau_hat: &[f64]) -> Result<f64> {
    if tau_true.len() != tau_hat.len() || tau_true.is_empty() {
        return Err(Error::shape(
            "pehe",
            format!("{} vs {}", tau_true.len(), tau_hat.len()),
        ));
    }
    let n = tau_true.len() as f64;
    Ok(tau_true
        .iter()
        .zip(tau_hat.iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Absolute difference of mean effects.
pub fn ate_error(tau_true: &[f64], tau_hat: &[f64]) -> Result<f64> {
    if tau_true.len() != tau_hat.len() || tau_true.is_empty() {
        return Err(Error::shape(
            "ate_error",
            format!("{} vs {}", tau_true.len(), tau_hat.len()),
        ));
    }
    let n = tau_true.len() as f64;
    let mean_true = tau_true.iter().sum::<f64>() / n;
    let mean_hat = tau_hat.iter().sum::<f64>() / n;
    Ok((mean_true - mean_hat).abs())
}

/// Policy risk of treating by the sign of the estimated effect, evaluated on
/// a randomized binary-outcome subset. Conditional means are estimated on
/// the factual arms; empty cells contribute zero with a warning.
pub fn policy_risk(ds: &CausalDataset, tau_hat: &[f64]) -> Result<f64> {
    if !ds.randomized {
        return Err(Error::Usage(format!(
            "policy risk needs a randomized subset; dataset '{}' is not flagged as one",
            ds.name
        )));
    }
    if !ds.binary_outcome {
        return Err(Error::Usage(format!(
            "policy risk needs binary outcomes; dataset '{}' is not binary",
            ds.name
        )));
    }
    if tau_hat.len() != ds.n() {
        return Err(Error::shape(
            "policy_risk",
            format!("{} effects vs {} rows", tau_hat.len(), ds.n()),
        ));
    }
    let n = ds.n() as f64;
    let policy: Vec<bool> = tau_hat.iter().map(|&v| v > 0.0).collect();
    let p_treat = policy.iter().filter(|&&p| p).count() as f64 / n;

    let mut value = 0.0;
    for (arm, p_arm) in [(true, p_treat), (false, 1.0 - p_treat)] {
        if p_arm == 0.0 {
            continue;
        }
        let cell: Vec<usize> = (0..ds.n())
            .filter(|&i| policy[i] == arm && (ds.t[i] == 1) == arm)
            .collect();
        if cell.is_empty() {
            eprintln!(
                "warning: policy risk on '{}' has an empty factual cell for policy={}; it contributes 0",
                ds.name, arm as u8
            );
            continue;
        }
        let mean = cell.iter().map(|&i| ds.y[i]).sum::<f64>() / cell.len() as f64;
        value += p_arm * mean;
    }
    Ok(1.0 - value)
}

/// Bias of the estimated average effect on the treated: the absolute
/// difference between the factual group-mean gap and the mean estimated
/// effect over treated units, each taken in absolute value.
pub fn att_error(ds: &CausalDataset, tau_hat: &[f64]) -> Result<f64> {
    let (n0, n1) = ds.group_sizes();
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleGroup(format!(
            "att needs both groups, got control={n0} treated={n1}"
        )));
    }
    if tau_hat.len() != ds.n() {
        return Err(Error::shape(
            "att_error",
            format!("{} effects vs {} rows", tau_hat.len(), ds.n()),
        ));
    }
    let mut sum_t = 0.0;
    let mut sum_c = 0.0;
    let mut sum_tau_treated = 0.0;
    for i in 0..ds.n() {
        if ds.t[i] == 1 {
            sum_t += ds.y[i];
            sum_tau_treated += tau_hat[i];
        } else {
            sum_c += ds.y[i];
        }
    }
    let att_factual = (sum_t / n1 as f64 - sum_c / n0 as f64).abs();
    let att_estimated = (sum_tau_treated / n1 as f64).abs();
    Ok((att_factual - att_estimated).abs())
}

/// Gaussian-potential uniformity of representations on the unit hypersphere:
/// rows are L2-normalized and the metric is
/// log mean over unordered pairs of exp(-2 ||z_i - z_j||^2).
/// Lower is better; identical rows give 0.
pub fn uniformity(phi: &Matrix) -> Result<f64> {
    let n = phi.rows();
    if n < 2 {
        return Err(Error::Usage(format!("uniformity needs at least 2 rows, got {n}")));
    }
    let mut unit = Matrix::zeros(n, phi.cols());
    for i in 0..n {
        let row = phi.row(i);
        let norm = row.iter().map(|&v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numeric(format!(
                "cannot normalize representation row {i} with norm {norm}"
            )));
        }
        for (o, &v) in unit.row_mut(i).iter_mut().zip(row.iter()) {
            *o = v / norm;
        }
    }
    let mut acc = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += (-2.0 * sq_dist(unit.row(i), unit.row(j))).exp();
            pairs += 1;
        }
    }
    Ok((acc / pairs as f64).ln())
}

/// One estimator's evaluation over the within-sample and out-of-sample
/// splits. Effect metrics appear only when ground truth exists; policy
/// metrics only for randomized binary-outcome data; uniformity only when
/// representations were supplied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sqrt_pehe_within: Option<f64>,
    pub ate_err_within: Option<f64>,
    pub sqrt_pehe_out: Option<f64>,
    pub ate_err_out: Option<f64>,
    /// Policy risk on the out-of-sample units.
    pub r_pol: Option<f64>,
    /// ATT bias on the out-of-sample units.
    pub att_err: Option<f64>,
    pub uniformity: Option<f64>,
    pub n_within: usize,
    pub n_out: usize,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "sqrt_pehe_within,ate_err_within,sqrt_pehe_out,ate_err_out,r_pol,att_err,uniformity,n_within,n_out";

    pub fn csv_row(&self) -> String {
        let cell = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        format!(
            "{},{},{},{},{},{},{},{},{}",
            cell(self.sqrt_pehe_within),
            cell(self.ate_err_within),
            cell(self.sqrt_pehe_out),
            cell(self.ate_err_out),
            cell(self.r_pol),
            cell(self.att_err),
            cell(self.uniformity),
            self.n_within,
            self.n_out
        )
    }

    /// Metric by column name, for aggregation.
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "sqrt_pehe_within" => self.sqrt_pehe_within,
            "ate_err_within" => self.ate_err_within,
            "sqrt_pehe_out" => self.sqrt_pehe_out,
            "ate_err_out" => self.ate_err_out,
            "r_pol" => self.r_pol,
            "att_err" => self.att_err,
            "uniformity" => self.uniformity,
            _ => None,
        }
    }
}

/// Scores estimated effects under the within-sample (train + validation)
/// versus out-of-sample (test) convention.
pub fn evaluate(
    within: &CausalDataset,
    out: &CausalDataset,
    tau_hat_within: &[f64],
    tau_hat_out: &[f64],
    repr_out: Option<&Matrix>,
) -> Result<EvalReport> {
    if tau_hat_within.len() != within.n() || tau_hat_out.len() != out.n() {
        return Err(Error::shape(
            "evaluate",
            format!(
                "effects {}/{} vs rows {}/{}",
                tau_hat_within.len(),
                tau_hat_out.len(),
                within.n(),
                out.n()
            ),
        ));
    }
    let mut report = EvalReport {
        sqrt_pehe_within: None,
        ate_err_within: None,
        sqrt_pehe_out: None,
        ate_err_out: None,
        r_pol: None,
        att_err: None,
        uniformity: None,
        n_within: within.n(),
        n_out: out.n(),
    };

    if within.has_ground_truth() && out.has_ground_truth() {
        let tau_w = within.true_ite()?;
        let tau_o = out.true_ite()?;
        let pehe_w = pehe(&tau_w, tau_hat_within)?;
        let pehe_o = pehe(&tau_o, tau_hat_out)?;
        let ate_w = ate_error(&tau_w, tau_hat_within)?;
        let ate_o = ate_error(&tau_o, tau_hat_out)?;
        // Jensen: the ATE error can never exceed the root PEHE.
        assert!(ate_w <= pehe_w.sqrt() + 1e-12);
        assert!(ate_o <= pehe_o.sqrt() + 1e-12);
        report.sqrt_pehe_within = Some(pehe_w.sqrt());
        report.ate_err_within = Some(ate_w);
        report.sqrt_pehe_out = Some(pehe_o.sqrt());
        report.ate_err_out = Some(ate_o);
    }

    if out.binary_outcome && out.randomized {
        report.r_pol = Some(policy_risk(out, tau_hat_out)?);
        report.att_err = Some(att_error(out, tau_hat_out)?);
    }

    if let Some(phi) = repr_out {
        report.uniformity = Some(uniformity(phi)?);
    }
    Ok(report)
}
