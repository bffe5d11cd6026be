//! `report`: regenerate tables from raw results and dump projected
//! representation coordinates plus uniformity values for external plotting.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::pca2;
use crate::matrix::Matrix;
use crate::metrics::uniformity;

use super::bench::{aggregate, render_csv, render_text, RawRecord};
use super::{read_json, write_json};

#[derive(Clone, Debug, Serialize)]
pub struct ReportSummary {
    pub runs: usize,
    pub aggregate_cells: usize,
    pub uniformity_rows: usize,
    pub out_dir: String,
}

fn read_repr_csv(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            column: "<repr>".to_string(),
            msg: e.to_string(),
        })?);
    }
    Matrix::from_rows(&rows)
}

/// Rebuilds tables from `results_raw.json` in `results_dir` (byte-identical
/// to what `benchmark` wrote) and, when representation dumps exist, writes
/// 2-component projections plus a uniformity table.
pub fn cmd_report(results_dir: &Path, out_dir: Option<&Path>) -> Result<ReportSummary> {
    let raw_path = results_dir.join("results_raw.json");
    if !raw_path.exists() {
        let found = fs::read_dir(results_dir)
            .map(|entries| entries.filter_map(|e| e.ok()).count())
            .unwrap_or(0);
        return Err(Error::MissingResults(format!(
            "no results_raw.json under {} ({} directory entries found, 0 usable runs)",
            results_dir.display(),
            found
        )));
    }
    let records: Vec<RawRecord> = read_json(&raw_path)?;
    if records.is_empty() {
        return Err(Error::MissingResults(format!(
            "results_raw.json under {} contains zero runs",
            results_dir.display()
        )));
    }
    let out = out_dir.unwrap_or(results_dir);
    super::ensure_dir(out)?;

    // Preserve first-seen order of estimators and settings.
    let mut estimators: Vec<String> = Vec::new();
    let mut settings: Vec<String> = Vec::new();
    for r in &records {
        if !estimators.contains(&r.estimator) {
            estimators.push(r.estimator.clone());
        }
        if !settings.contains(&r.setting) {
            settings.push(r.setting.clone());
        }
    }
    let cells = aggregate(&records, &estimators, &settings);
    write_json(&out.join("results_agg.json"), &cells)?;
    fs::write(out.join("results_table.csv"), render_csv(&cells))
        .map_err(|e| Error::io(out.display().to_string(), e))?;
    fs::write(
        out.join("results_table.txt"),
        render_text(&cells, &estimators, &settings),
    )
    .map_err(|e| Error::io(out.display().to_string(), e))?;

    // Representation dumps, when present.
    let repr_dir = results_dir.join("repr");
    let mut uniformity_rows = 0usize;
    if repr_dir.is_dir() {
        let mut paths: Vec<PathBuf> = fs::read_dir(&repr_dir)
            .map_err(|e| Error::io(repr_dir.display().to_string(), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        paths.sort();
        let mut table = String::from("source,n,uniformity\n");
        for path in &paths {
            let phi = read_repr_csv(path)?;
            let u = uniformity(&phi)?;
            let stem = path
                .file_stem()
                .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            let _ = writeln!(table, "{},{},{}", stem, phi.rows(), u);
            uniformity_rows += 1;

            let proj = pca2(&phi)?;
            let mut proj_csv = String::from("pc1,pc2\n");
            for i in 0..proj.rows() {
                let second = if proj.cols() > 1 { proj.get(i, 1) } else { 0.0 };
                let _ = writeln!(proj_csv, "{},{}", proj.get(i, 0), second);
            }
            let proj_path = out.join(format!("report_projection_{stem}.csv"));
            fs::write(&proj_path, proj_csv)
                .map_err(|e| Error::io(proj_path.display().to_string(), e))?;
        }
        if uniformity_rows > 0 {
            fs::write(out.join("report_uniformity.csv"), table)
                .map_err(|e| Error::io(out.display().to_string(), e))?;
        }
    }

    Ok(ReportSummary {
        runs: records.len(),
        aggregate_cells: cells.len(),
        uniformity_rows,
        out_dir: out.display().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::cmd_benchmark;
    use crate::harness::config::{BenchmarkConfig, BenchmarkData, ModelSpec};
    use crate::trainer::TrainConfig;

    #[test]
    fn report_errors_on_empty_dir() {
        let dir = std::env::temp_dir().join(format!("pite-report-empty-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        match cmd_report(&dir, None) {
            Err(Error::MissingResults(msg)) => assert!(msg.contains("0 usable runs")),
            other => panic!("expected missing-results error, got {other:?}"),
        }
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn report_is_idempotent_and_dumps_uniformity() {
        let dir = std::env::temp_dir().join(format!("pite-report-{}", std::process::id()));
        let cfg = BenchmarkConfig {
            data: BenchmarkData::Synthetic {
                gammas: vec![0.4],
                n: 60,
                p: 3,
                rho: 0.2,
                sigma2: 3.0,
                beta0_value: 0.2,
                beta1_value: 1.2,
            },
            estimators: vec!["pite".to_string(), "ols2".to_string()],
            model: ModelSpec {
                repr_dim: 6,
                encoder_layers: vec![6],
                head_layers: vec![4, 1],
                ..ModelSpec::default()
            },
            train: TrainConfig {
                k: 2,
                batch_size: 16,
                max_epochs: 3,
                patience: 3,
                ..TrainConfig::default()
            },
            replications: 2,
            seed_base: 3,
            out_dir: dir.clone(),
            dump_representations: true,
            ..BenchmarkConfig::default()
        };
        cmd_benchmark(&cfg).unwrap();
        let table_from_bench = fs::read(dir.join("results_table.txt")).unwrap();

        let summary = cmd_report(&dir, None).unwrap();
        assert_eq!(summary.runs, 4);
        // pite dumped one representation per replication.
        assert_eq!(summary.uniformity_rows, 2);
        // Regeneration reproduces the benchmark's table bytes.
        assert_eq!(table_from_bench, fs::read(dir.join("results_table.txt")).unwrap());
        // Running report twice is byte-stable too.
        let uni1 = fs::read(dir.join("report_uniformity.csv")).unwrap();
        cmd_report(&dir, None).unwrap();
        assert_eq!(uni1, fs::read(dir.join("report_uniformity.csv")).unwrap());
        // Uniformity table exists because representations were dumped.
        assert!(String::from_utf8(uni1).unwrap().lines().count() > 1);

        fs::remove_dir_all(&dir).ok();
    }
}
