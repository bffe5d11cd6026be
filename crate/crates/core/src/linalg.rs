//! Small dense solvers: Cholesky, least squares, a logistic fit for the
//! overlap diagnostic, and a two-component PCA for representation dumps.

use crate::activation::sigmoid;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    if a.rows() != a.cols() {
        return Err(Error::shape("cholesky", format!("{:?} not square", a.shape())));
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Numeric(format!(
                        "matrix not positive definite (pivot {sum:.3e} at {i})"
                    )));
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solves A x = b for symmetric positive-definite A via Cholesky.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let l = cholesky(a)?;
    let n = l.rows();
    if b.len() != n {
        return Err(Error::shape("solve_spd", format!("rhs {} vs {}", b.len(), n)));
    }
    // Forward: L z = b
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l.get(i, k) * z[k];
        }
        z[i] = sum / l.get(i, i);
    }
    // Back: L^T x = z
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = z[i];
        for k in (i + 1)..n {
            sum -= l.get(k, i) * x[k];
        }
        x[i] = sum / l.get(i, i);
    }
    Ok(x)
}

/// Least-squares coefficients of y on the columns of x via normal equations.
/// `ridge` is added to the diagonal (0.0 for plain OLS).
pub fn lstsq(x: &Matrix, y: &[f64], ridge: f64) -> Result<Vec<f64>> {
    if x.rows() != y.len() {
        return Err(Error::shape(
            "lstsq",
            format!("{} rows vs {} targets", x.rows(), y.len()),
        ));
    }
    let mut xtx = x.tr_matmul(x)?;
    if ridge != 0.0 {
        for i in 0..xtx.rows() {
            xtx.set(i, i, xtx.get(i, i) + ridge);
        }
    }
    let mut xty = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        let row = x.row(i);
        for (acc, &v) in xty.iter_mut().zip(row.iter()) {
            *acc += v * y[i];
        }
    }
    solve_spd(&xtx, &xty)
}

/// Logistic regression of a binary label on `x` plus an intercept, fitted by
/// ridge-damped IRLS. Deterministic; iteration count is fixed. Used only as a
/// projection score, so convergence to machine precision is not required.
pub fn fit_logistic(x: &Matrix, labels: &[f64], iters: usize) -> Result<Vec<f64>> {
    let n = x.rows();
    let d = x.cols() + 1; // intercept last
    if labels.len() != n {
        return Err(Error::shape(
            "fit_logistic",
            format!("{} rows vs {} labels", n, labels.len()),
        ));
    }
    let mut w = vec![0.0; d];
    for _ in 0..iters {
        // Gradient and Hessian of the penalized log-likelihood.
        let mut grad = vec![0.0; d];
        let mut hess = Matrix::zeros(d, d);
        for i in 0..n {
            let row = x.row(i);
            let mut z = w[d - 1];
            for (wj, &v) in w.iter().zip(row.iter()) {
                z += wj * v;
            }
            let p = sigmoid(z).clamp(1e-9, 1.0 - 1e-9);
            let r = labels[i] - p;
            let s = p * (1.0 - p);
            for j in 0..d {
                let xj = if j == d - 1 { 1.0 } else { row[j] };
                grad[j] += r * xj;
                for k in 0..=j {
                    let xk = if k == d - 1 { 1.0 } else { row[k] };
                    hess.set(j, k, hess.get(j, k) + s * xj * xk);
                }
            }
        }
        for j in 0..d {
            for k in (j + 1)..d {
                hess.set(j, k, hess.get(k, j));
            }
            hess.set(j, j, hess.get(j, j) + 1e-6);
        }
        let step = solve_spd(&hess, &grad)?;
        let mut max_step = 0.0f64;
        for (wj, s) in w.iter_mut().zip(step.iter()) {
            *wj += s;
            max_step = max_step.max(s.abs());
        }
        if max_step < 1e-10 {
            break;
        }
    }
    Ok(w)
}

/// Scores x under a logistic fit from [`fit_logistic`] (linear part, before
/// the sigmoid).
pub fn logistic_score(x: &Matrix, w: &[f64]) -> Vec<f64> {
    let d = x.cols();
    (0..x.rows())
        .map(|i| {
            let row = x.row(i);
            let mut z = w[d];
            for (wj, &v) in w.iter().zip(row.iter()) {
                z += wj * v;
            }
            z
        })
        .collect()
}

/// Projects rows of `m` onto their first two principal components.
///
/// Power iteration with deflation from a fixed starting vector; the sign of
/// each component is normalized so its largest-magnitude loading is positive,
/// which keeps dumps byte-reproducible.
pub fn pca2(m: &Matrix) -> Result<Matrix> {
    let n = m.rows();
    let d = m.cols();
    if n == 0 || d == 0 {
        return Err(Error::shape("pca2", "empty matrix".to_string()));
    }
    let mut means = vec![0.0; d];
    for i in 0..n {
        for (mean, &v) in means.iter_mut().zip(m.row(i).iter()) {
            *mean += v;
        }
    }
    for mean in &mut means {
        *mean /= n as f64;
    }
    let centered = Matrix::from_fn(n, d, |i, j| m.get(i, j) - means[j]);
    let mut cov = centered.tr_matmul(&centered)?;
    if n > 1 {
        cov = cov.scale(1.0 / (n as f64 - 1.0));
    }

    let mut components: Vec<Vec<f64>> = Vec::new();
    let mut work = cov;
    for comp in 0..2.min(d) {
        // Deterministic non-degenerate start.
        let mut v: Vec<f64> = (0..d)
            .map(|j| 1.0 + ((j + comp * 7 + 1) as f64 * 0.7391).sin())
            .collect();
        for _ in 0..300 {
            let mut next = vec![0.0; d];
            for i in 0..d {
                let row = work.row(i);
                let mut acc = 0.0;
                for (&w, &x) in row.iter().zip(v.iter()) {
                    acc += w * x;
                }
                next[i] = acc;
            }
            let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                break;
            }
            for x in &mut next {
                *x /= norm;
            }
            v = next;
        }
        // Sign convention: largest-magnitude loading positive.
        let lead = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        if v[lead] < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        // Deflate: work -= lambda v v^T.
        let mut wv = vec![0.0; d];
        for i in 0..d {
            let row = work.row(i);
            let mut acc = 0.0;
            for (&w, &x) in row.iter().zip(v.iter()) {
                acc += w * x;
            }
            wv[i] = acc;
        }
        let lambda: f64 = wv.iter().zip(v.iter()).map(|(&a, &b)| a * b).sum();
        for i in 0..d {
            for j in 0..d {
                work.set(i, j, work.get(i, j) - lambda * v[i] * v[j]);
            }
        }
        components.push(v);
    }

    let out = Matrix::from_fn(n, components.len(), |i, c| {
        let row = centered.row(i);
        components[c]
            .iter()
            .zip(row.iter())
            .map(|(&a, &b)| a * b)
            .sum()
    });
    Ok(out)
}
