//! Causal datasets: the synthetic benchmark generator, CSV ingestion for
//! external benchmarks, split management, and identification diagnostics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activation::sigmoid;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, fit_logistic, logistic_score};
use crate::matrix::Matrix;
use crate::rng::RngStream;

/// Ground-truth potential outcomes, when a dataset carries them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GroundTruth {
    /// No counterfactual ground truth (observational data).
    None,
    /// Realized potential outcomes; the factual outcome is exactly the
    /// selected one, so `y == (1 - t) * y0 + t * y1` holds bitwise.
    Realized { y0: Vec<f64>, y1: Vec<f64> },
    /// Noiseless conditional means (the usual semi-synthetic convention);
    /// factual outcomes carry independent noise around them.
    Means { mu0: Vec<f64>, mu1: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CausalDataset {
    pub name: String,
    pub x: Matrix,
    /// Treatment indicator per unit, values 0 or 1.
    pub t: Vec<u8>,
    /// Factual outcome per unit.
    pub y: Vec<f64>,
    pub truth: GroundTruth,
    /// True when outcomes are 0/1 and losses/metrics should treat them as such.
    pub binary_outcome: bool,
    /// True when the data comes from a randomized subset, making policy-value
    /// metrics valid.
    pub randomized: bool,
}

impl CausalDataset {
    pub fn new(
        name: impl Into<String>,
        x: Matrix,
        t: Vec<u8>,
        y: Vec<f64>,
        truth: GroundTruth,
    ) -> Result<Self> {
        let ds = CausalDataset {
            name: name.into(),
            x,
            t,
            y,
            truth,
            binary_outcome: false,
            randomized: false,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.rows();
        if self.t.len() != n || self.y.len() != n {
            return Err(Error::shape(
                "dataset",
                format!("{} rows but {} treatments / {} outcomes", n, self.t.len(), self.y.len()),
            ));
        }
        if let Some(bad) = self.t.iter().position(|&t| t > 1) {
            return Err(Error::Config(format!(
                "treatment must be 0 or 1, found {} at row {}",
                self.t[bad], bad
            )));
        }
        let (n0, n1) = self.group_sizes();
        if n0 == 0 || n1 == 0 {
            return Err(Error::SingleGroup(format!(
                "dataset '{}' has group sizes control={} treated={}",
                self.name, n0, n1
            )));
        }
        if !self.x.is_finite() || self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "dataset '{}' contains non-finite values",
                self.name
            )));
        }
        match &self.truth {
            GroundTruth::None => {}
            GroundTruth::Realized { y0, y1 } => {
                if y0.len() != n || y1.len() != n {
                    return Err(Error::shape("dataset", "potential outcome length".to_string()));
                }
                for i in 0..n {
                    let composed = if self.t[i] == 1 { y1[i] } else { y0[i] };
                    if self.y[i] != composed {
                        return Err(Error::Config(format!(
                            "row {}: observed outcome {} does not equal the assigned potential outcome {}",
                            i, self.y[i], composed
                        )));
                    }
                }
            }
            GroundTruth::Means { mu0, mu1 } => {
                if mu0.len() != n || mu1.len() != n {
                    return Err(Error::shape("dataset", "potential-mean length".to_string()));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// (control count, treated count)
    pub fn group_sizes(&self) -> (usize, usize) {
        let treated = self.t.iter().filter(|&&t| t == 1).count();
        (self.t.len() - treated, treated)
    }

    pub fn has_ground_truth(&self) -> bool {
        !matches!(self.truth, GroundTruth::None)
    }

    /// Per-unit true effect: difference of the stored potential outcomes.
    pub fn true_ite(&self) -> Result<Vec<f64>> {
        match &self.truth {
            GroundTruth::Realized { y0, y1 } => {
                Ok(y1.iter().zip(y0.iter()).map(|(a, b)| a - b).collect())
            }
            GroundTruth::Means { mu0, mu1 } => {
                Ok(mu1.iter().zip(mu0.iter()).map(|(a, b)| a - b).collect())
            }
            GroundTruth::None => Err(Error::MissingGroundTruth(format!(
                "dataset '{}' has no potential outcomes",
                self.name
            ))),
        }
    }

    /// Row subset in the given index order. Does not re-check the two-group
    /// invariant; splits may legitimately produce single-group subsets and
    /// warn instead.
    pub(crate) fn subset(&self, idx: &[usize], name: impl Into<String>) -> CausalDataset {
        let pick = |v: &Vec<f64>| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        CausalDataset {
            name: name.into(),
            x: self.x.gather_rows(idx),
            t: idx.iter().map(|&i| self.t[i]).collect(),
            y: pick(&self.y),
            truth: match &self.truth {
                GroundTruth::None => GroundTruth::None,
                GroundTruth::Realized { y0, y1 } => GroundTruth::Realized {
                    y0: pick(y0),
                    y1: pick(y1),
                },
                GroundTruth::Means { mu0, mu1 } => GroundTruth::Means {
                    mu0: pick(mu0),
                    mu1: pick(mu1),
                },
            },
            binary_outcome: self.binary_outcome,
            randomized: self.randomized,
        }
    }

    pub fn concat(&self, other: &CausalDataset) -> Result<CausalDataset> {
        if self.dim() != other.dim() {
            return Err(Error::shape(
                "concat",
                format!("{} vs {} covariates", self.dim(), other.dim()),
            ));
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(self.n() + other.n());
        for i in 0..self.n() {
            rows.push(self.x.row(i).to_vec());
        }
        for i in 0..other.n() {
            rows.push(other.x.row(i).to_vec());
        }
        let cat = |a: &Vec<f64>, b: &Vec<f64>| {
            let mut v = a.clone();
            v.extend_from_slice(b);
            v
        };
        let truth = match (&self.truth, &other.truth) {
            (GroundTruth::Realized { y0: a0, y1: a1 }, GroundTruth::Realized { y0: b0, y1: b1 }) => {
                GroundTruth::Realized {
                    y0: cat(a0, b0),
                    y1: cat(a1, b1),
                }
            }
            (GroundTruth::Means { mu0: a0, mu1: a1 }, GroundTruth::Means { mu0: b0, mu1: b1 }) => {
                GroundTruth::Means {
                    mu0: cat(a0, b0),
                    mu1: cat(a1, b1),
                }
            }
            _ => GroundTruth::None,
        };
        let mut t = self.t.clone();
        t.extend_from_slice(&other.t);
        Ok(CausalDataset {
            name: format!("{}+{}", self.name, other.name),
            x: Matrix::from_rows(&rows)?,
            t,
            y: cat(&self.y, &other.y),
            truth,
            binary_outcome: self.binary_outcome && other.binary_outcome,
            randomized: self.randomized && other.randomized,
        })
    }
}

/// Parameters of the equicorrelated-Gaussian synthetic benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub p: usize,
    pub n: usize,
    pub rho: f64,
    pub sigma2: f64,
    /// Covariate dispersion scaling; distinct from the diversity-loss weight.
    pub gamma_disp: f64,
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            p: 10,
            n: 800,
            rho: 0.2,
            sigma2: 3.0,
            gamma_disp: 1.0,
            beta0: vec![0.2; 10],
            beta1: vec![1.2; 10],
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn with_dispersion(gamma_disp: f64, seed: u64) -> Self {
        SyntheticConfig {
            gamma_disp,
            seed,
            ..SyntheticConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Config(format!(
                "rho must lie in [0, 1) for a non-degenerate covariance, got {}",
                self.rho
            )));
        }
        if self.sigma2 <= 0.0 || self.gamma_disp <= 0.0 {
            return Err(Error::Config(format!(
                "sigma2 and gamma_disp must be positive, got {} and {}",
                self.sigma2, self.gamma_disp
            )));
        }
        if self.beta0.len() != self.p || self.beta1.len() != self.p {
            return Err(Error::Config(format!(
                "beta vectors must have length p={}, got {} and {}",
                self.p,
                self.beta0.len(),
                self.beta1.len()
            )));
        }
        if self.p == 0 || self.n < 4 {
            return Err(Error::Config(format!(
                "need p >= 1 and n >= 4, got p={} n={}",
                self.p, self.n
            )));
        }
        Ok(())
    }
}

/// Draws a dataset from the synthetic process:
/// covariates from N(0, gamma * sigma^2 * [rho 11^T + (1 - rho) I]),
/// treatment from Bernoulli(sigmoid(1^T x)), and linear potential outcomes
/// sharing one noise draw per unit so the true effect is noiseless.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<CausalDataset> {
    cfg.validate()?;
    let p = cfg.p;
    let scale = cfg.gamma_disp * cfg.sigma2;
    let cov = Matrix::from_fn(p, p, |i, j| {
        if i == j {
            scale
        } else {
            scale * cfg.rho
        }
    });
    let chol = cholesky(&cov)
        .map_err(|e| Error::Config(format!("degenerate synthetic covariance: {e}")))?;

    let mut rng = RngStream::new(cfg.seed);
    let mut x = Matrix::zeros(cfg.n, p);
    let mut t = Vec::with_capacity(cfg.n);
    let mut y0 = Vec::with_capacity(cfg.n);
    let mut y1 = Vec::with_capacity(cfg.n);
    let mut y = Vec::with_capacity(cfg.n);
    let mut z = vec![0.0; p];
    for i in 0..cfg.n {
        for zj in z.iter_mut() {
            *zj = rng.normal();
        }
        let row = x.row_mut(i);
        for (j, r) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..=j {
                acc += chol.get(j, k) * z[k];
            }
            *r = acc;
        }
        let logit: f64 = row.iter().sum();
        let ti = u8::from(rng.next_f64() < sigmoid(logit));
        let xi = rng.normal();
        let m0: f64 = row.iter().zip(cfg.beta0.iter()).map(|(&a, &b)| a * b).sum();
        let m1: f64 = row.iter().zip(cfg.beta1.iter()).map(|(&a, &b)| a * b).sum();
        let o0 = m0 + xi;
        let o1 = m1 + xi;
        t.push(ti);
        y.push(if ti == 1 { o1 } else { o0 });
        y0.push(o0);
        y1.push(o1);
    }

    CausalDataset::new(
        format!("synthetic(gamma={},seed={})", cfg.gamma_disp, cfg.seed),
        x,
        t,
        y,
        GroundTruth::Realized { y0, y1 },
    )
}

/// Train/validation/test fractions plus the shuffle seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub valid_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.63,
            valid_frac: 0.27,
            test_frac: 0.10,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.valid_frac, self.test_frac];
        if fracs.iter().any(|&f| f <= 0.0) {
            return Err(Error::Config(format!("split fractions must be positive: {fracs:?}")));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("split fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Disjoint shuffled split. Validation and test sizes are round(frac * n);
/// remainder rows go to train. Emits a warning on stderr when a split loses
/// one of the treatment groups.
pub fn split(
    ds: &CausalDataset,
    spec: &SplitSpec,
) -> Result<(CausalDataset, CausalDataset, CausalDataset)> {
    spec.validate()?;
    let n = ds.n();
    if n < 10 {
        return Err(Error::Split(format!("need at least 10 rows to split, got {n}")));
    }
    let n_valid = (spec.valid_frac * n as f64).round() as usize;
    let n_test = (spec.test_frac * n as f64).round() as usize;
    let n_train = n
        .checked_sub(n_valid + n_test)
        .ok_or_else(|| Error::Split(format!("fractions leave no training rows for n={n}")))?;
    if n_train == 0 || n_valid == 0 || n_test == 0 {
        return Err(Error::Split(format!(
            "empty split for n={n}: train={n_train} valid={n_valid} test={n_test}"
        )));
    }

    let mut idx: Vec<usize> = (0..n).collect();
    RngStream::new(spec.seed).shuffle(&mut idx);
    let train = ds.subset(&idx[..n_train], format!("{}/train", ds.name));
    let valid = ds.subset(&idx[n_train..n_train + n_valid], format!("{}/valid", ds.name));
    let test = ds.subset(&idx[n_train + n_valid..], format!("{}/test", ds.name));

    for part in [&train, &valid, &test] {
        let (n0, n1) = part.group_sizes();
        if n0 == 0 || n1 == 0 {
            eprintln!(
                "warning: split '{}' has a single treatment group (control={n0}, treated={n1})",
                part.name
            );
        }
    }
    Ok((train, valid, test))
}

/// Options for [`load_csv`].
#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    pub name: Option<String>,
    /// Force the binary-outcome flag; auto-detected from the outcomes if None.
    pub binary_outcome: Option<bool>,
    pub randomized: bool,
}

/// Loads the benchmark CSV schema `x1,...,xd,t,y[,mu0,mu1|,y0,y1]`.
pub fn load_csv(path: &Path, opts: &LoadOptions) -> Result<CausalDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_csv(&text, &path.display().to_string(), opts)
}

fn parse_csv(text: &str, path: &str, opts: &LoadOptions) -> Result<CausalDataset> {
    let perr = |line: usize, column: &str, msg: String| Error::Parse {
        path: path.to_string(),
        line,
        column: column.to_string(),
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| perr(1, "<header>", "empty file".to_string()))?;
    let cols: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();

    // Leading x1..xd block.
    let mut d = 0;
    while d < cols.len() && cols[d] == format!("x{}", d + 1) {
        d += 1;
    }
    if d == 0 {
        return Err(perr(1, "x1", format!("header must start with x1, got '{}'", cols[0])));
    }
    let rest: Vec<&str> = cols[d..].iter().map(|s| s.as_str()).collect();
    #[derive(PartialEq, Clone, Copy)]
    enum Truth {
        None,
        Mu,
        Y,
    }
    let truth_kind = match rest.as_slice() {
        ["t", "y"] => Truth::None,
        ["t", "y", "mu0", "mu1"] => Truth::Mu,
        ["t", "y", "y0", "y1"] => Truth::Y,
        _ => {
            return Err(perr(
                1,
                "<header>",
                format!("expected t,y[,mu0,mu1|,y0,y1] after x1..x{d}, got {rest:?}"),
            ))
        }
    };
    let ncols = cols.len();

    let mut x_rows: Vec<Vec<f64>> = Vec::new();
    let mut t = Vec::new();
    let mut y = Vec::new();
    let mut g0 = Vec::new();
    let mut g1 = Vec::new();
    for (line_idx, line) in lines {
        let lineno = line_idx + 1; // 1-based, counting the header
        let cells: Vec<&str> = line.split(',').map(|c| c.trim()).collect();
        if cells.len() != ncols {
            return Err(perr(
                lineno,
                "<row>",
                format!("expected {ncols} cells, got {}", cells.len()),
            ));
        }
        let parse = |idx: usize| -> Result<f64> {
            cells[idx]
                .parse::<f64>()
                .map_err(|_| perr(lineno, &cols[idx], format!("not a number: '{}'", cells[idx])))
        };
        let mut row = Vec::with_capacity(d);
        for j in 0..d {
            row.push(parse(j)?);
        }
        let t_val = parse(d)?;
        if t_val != 0.0 && t_val != 1.0 {
            return Err(perr(lineno, "t", format!("treatment must be 0 or 1, got {t_val}")));
        }
        x_rows.push(row);
        t.push(t_val as u8);
        y.push(parse(d + 1)?);
        if truth_kind != Truth::None {
            g0.push(parse(d + 2)?);
            g1.push(parse(d + 3)?);
        }
    }
    if x_rows.is_empty() {
        return Err(perr(2, "<row>", "no data rows".to_string()));
    }

    let truth = match truth_kind {
        Truth::None => GroundTruth::None,
        Truth::Mu => GroundTruth::Means { mu0: g0, mu1: g1 },
        Truth::Y => GroundTruth::Realized { y0: g0, y1: g1 },
    };
    let name = opts
        .name
        .clone()
        .unwrap_or_else(|| Path::new(path).file_stem().map_or_else(|| path.to_string(), |s| s.to_string_lossy().into_owned()));
    let mut ds = CausalDataset::new(name, Matrix::from_rows(&x_rows)?, t, y, truth)?;
    ds.binary_outcome = opts
        .binary_outcome
        .unwrap_or_else(|| ds.y.iter().all(|&v| v == 0.0 || v == 1.0));
    ds.randomized = opts.randomized;
    Ok(ds)
}

/// Writes the CSV schema read back by [`load_csv`]. Floats use the shortest
/// round-trip encoding, so write/load/write is byte-stable.
pub fn write_csv(ds: &CausalDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let d = ds.dim();
    for j in 0..d {
        let _ = write!(out, "x{},", j + 1);
    }
    out.push_str("t,y");
    match &ds.truth {
        GroundTruth::None => {}
        GroundTruth::Means { .. } => out.push_str(",mu0,mu1"),
        GroundTruth::Realized { .. } => out.push_str(",y0,y1"),
    }
    out.push('\n');
    for i in 0..ds.n() {
        for &v in ds.x.row(i) {
            let _ = write!(out, "{v},");
        }
        let _ = write!(out, "{},{}", ds.t[i], ds.y[i]);
        match &ds.truth {
            GroundTruth::None => {}
            GroundTruth::Means { mu0, mu1 } => {
                let _ = write!(out, ",{},{}", mu0[i], mu1[i]);
            }
            GroundTruth::Realized { y0, y1 } => {
                let _ = write!(out, ",{},{}", y0[i], y1[i]);
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

#[derive(Clone, Debug, Serialize)]
pub struct OverlapBin {
    pub score_lo: f64,
    pub score_hi: f64,
    pub n: usize,
    pub treated_fraction: f64,
    pub violation: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OverlapReport {
    pub bins: Vec<OverlapBin>,
    pub violations: usize,
}

/// Positivity diagnostic: projects units onto a fitted logistic treatment
/// score, cuts the score into equal-count bins, and flags bins whose treated
/// fraction is exactly 0 or 1.
pub fn overlap_diagnostic(ds: &CausalDataset, bins: usize) -> Result<OverlapReport> {
    if bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {bins}")));
    }
    let labels: Vec<f64> = ds.t.iter().map(|&t| t as f64).collect();
    let w = fit_logistic(&ds.x, &labels, 25)?;
    let scores = logistic_score(&ds.x, &w);

    let mut order: Vec<usize> = (0..ds.n()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));

    let n = ds.n();
    let mut report = OverlapReport {
        bins: Vec::with_capacity(bins),
        violations: 0,
    };
    for b in 0..bins {
        let lo = b * n / bins;
        let hi = (b + 1) * n / bins;
        if lo == hi {
            continue;
        }
        let members = &order[lo..hi];
        let treated = members.iter().filter(|&&i| ds.t[i] == 1).count();
        let frac = treated as f64 / members.len() as f64;
        let violation = frac == 0.0 || frac == 1.0;
        if violation {
            report.violations += 1;
        }
        report.bins.push(OverlapBin {
            score_lo: scores[members[0]],
            score_hi: scores[*members.last().unwrap()],
            n: members.len(),
            treated_fraction: frac,
            violation,
        });
    }
    Ok(report)
}
