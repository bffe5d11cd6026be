//! `sweep`: grid search over the prototype hyperparameters, reusing the
//! benchmark machinery per grid setting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::bench::{aggregate, cmd_benchmark, RawRecord, METRIC_COLUMNS};
use super::config::{BenchmarkConfig, SweepConfig};
use super::{ensure_dir, write_json, RunMeta};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub grid_setting: String,
    pub data_setting: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArgminRow {
    pub data_setting: String,
    pub metric: String,
    pub grid_setting: String,
    pub mean: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub argmin: Vec<ArgminRow>,
    pub runs: usize,
    pub partial_failures: usize,
}

/// Cross-product of grid values and replications over the swept estimator.
pub fn cmd_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    if cfg.grid.is_empty() {
        return Err(Error::Config(
            "sweep grid is empty; populate at least one of k/alpha/beta/gamma_div/lambda"
                .to_string(),
        ));
    }
    cfg.benchmark.validate()?;
    ensure_dir(&cfg.benchmark.out_dir)?;

    let settings = cfg.grid.settings(&cfg.benchmark.train);
    let mut all_records: Vec<(String, Vec<RawRecord>)> = Vec::new();
    let mut rows = Vec::new();
    let mut runs = 0usize;
    let mut partial_failures = 0usize;

    for (label, tcfg) in &settings {
        let sub = BenchmarkConfig {
            estimators: vec!["pite".to_string()],
            train: tcfg.clone(),
            out_dir: cfg.benchmark.out_dir.join(format!("grid_{}", sanitize(label))),
            ..cfg.benchmark.clone()
        };
        let out = cmd_benchmark(&sub)?;
        runs += out.records.len();
        partial_failures += out.partial_failures;
        let cells = aggregate(&out.records, &sub.estimators, &out.settings);
        for cell in cells {
            rows.push(SweepRow {
                grid_setting: label.clone(),
                data_setting: cell.setting,
                metric: cell.metric,
                mean: cell.mean,
                std: cell.std,
                n: cell.n,
            });
        }
        all_records.push((label.clone(), out.records));
    }

    // argmin grid setting per (data setting, metric).
    let mut argmin = Vec::new();
    let data_settings: Vec<String> = {
        let mut seen = Vec::new();
        for row in &rows {
            if !seen.contains(&row.data_setting) {
                seen.push(row.data_setting.clone());
            }
        }
        seen
    };
    for data_setting in &data_settings {
        for metric in METRIC_COLUMNS {
            let best = rows
                .iter()
                .filter(|r| &r.data_setting == data_setting && r.metric == metric)
                .min_by(|a, b| a.mean.partial_cmp(&b.mean).unwrap());
            if let Some(best) = best {
                argmin.push(ArgminRow {
                    data_setting: data_setting.clone(),
                    metric: metric.to_string(),
                    grid_setting: best.grid_setting.clone(),
                    mean: best.mean,
                });
            }
        }
    }

    let output = SweepOutput {
        rows,
        argmin,
        runs,
        partial_failures,
    };
    write_json(&cfg.benchmark.out_dir.join("sweep.json"), &output)?;
    write_json(&cfg.benchmark.out_dir.join("sweep_raw.json"), &all_records)?;
    let mut csv = String::from("grid_setting,data_setting,metric,mean,std,n\n");
    for r in &output.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.grid_setting, r.data_setting, r.metric, r.mean, r.std, r.n
        ));
    }
    std::fs::write(cfg.benchmark.out_dir.join("sweep.csv"), csv)
        .map_err(|e| Error::io(cfg.benchmark.out_dir.display().to_string(), e))?;
    write_json(
        &cfg.benchmark.out_dir.join("run_meta.json"),
        &RunMeta::new("sweep", cfg.clone()),
    )?;
    Ok(output)
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{BenchmarkData, GridSpec, ModelSpec};
    use crate::trainer::TrainConfig;

    fn pite_config(dir: std::path::PathBuf) -> BenchmarkConfig {
        BenchmarkConfig {
            data: BenchmarkData::Synthetic {
                gammas: vec![0.4],
                n: 60,
                p: 3,
                rho: 0.2,
                sigma2: 3.0,
                beta0_value: 0.2,
                beta1_value: 1.2,
            },
            estimators: vec!["pite".to_string()],
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
            out_dir: dir,
            ..BenchmarkConfig::default()
        }
    }

    #[test]
    fn sweep_counts_argmin_and_singleton_equivalence() {
        let dir = std::env::temp_dir().join(format!("pite-sweep-{}", std::process::id()));
        let bench_cfg = pite_config(dir.join("bench"));
        let sweep_cfg = SweepConfig {
            benchmark: pite_config(dir.join("sweep")),
            grid: GridSpec {
                alpha: Some(vec![0.0, 1.0]),
                ..GridSpec::default()
            },
        };
        let out = cmd_sweep(&sweep_cfg).unwrap();
        // 2 grid values x 2 replications, one estimator each.
        assert_eq!(out.runs, 4);

        // argmin row's mean is the column minimum.
        for am in &out.argmin {
            for row in out
                .rows
                .iter()
                .filter(|r| r.metric == am.metric && r.data_setting == am.data_setting)
            {
                assert!(am.mean <= row.mean);
            }
        }

        // A singleton grid reproduces the plain benchmark aggregates.
        let singleton = SweepConfig {
            benchmark: pite_config(dir.join("singleton")),
            grid: GridSpec {
                alpha: Some(vec![1.0]),
                ..GridSpec::default()
            },
        };
        let single_out = cmd_sweep(&singleton).unwrap();
        let bench_out = cmd_benchmark(&bench_cfg).unwrap();
        for row in &single_out.rows {
            let bench_mean = bench_out
                .mean_of("pite", &row.data_setting, &row.metric)
                .unwrap();
            assert!(
                (row.mean - bench_mean).abs() < 1e-15,
                "{}: {} vs {}",
                row.metric,
                row.mean,
                bench_mean
            );
        }

        // Empty grid is rejected.
        let empty = SweepConfig {
            benchmark: pite_config(dir.join("empty")),
            grid: GridSpec::default(),
        };
        assert!(cmd_sweep(&empty).is_err());

        std::fs::remove_dir_all(&dir).ok();
    }
}
