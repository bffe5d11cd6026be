//! `benchmark`: replicated head-to-head evaluation of the prototype model
//! against the classical baselines, with publication-style mean(std) tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{knn, ols1, ols2, EstimatorOutput};
use crate::dataset::{load_csv, split, CausalDataset, LoadOptions};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{evaluate, EvalReport};
use crate::model::encode;
use crate::trainer::{fit, predict_outcomes, TrainConfig};

use super::config::{BenchmarkConfig, BenchmarkData};
use super::generate::load_manifest;
use super::{ensure_dir, run_indexed, write_json, RunMeta};

pub const METRIC_COLUMNS: [&str; 7] = [
    "sqrt_pehe_within",
    "ate_err_within",
    "sqrt_pehe_out",
    "ate_err_out",
    "r_pol",
    "att_err",
    "uniformity",
];

/// One estimator evaluated on one replication of one setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub setting: String,
    pub replication: usize,
    pub estimator: String,
    pub data_seed: Option<u64>,
    pub model_seed: u64,
    pub split_seed: u64,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub estimator: String,
    pub setting: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    /// True when the std comes from fewer than two replications.
    pub degenerate_std: bool,
    pub formatted: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchmarkOutput {
    pub records: Vec<RawRecord>,
    pub aggregates: Vec<AggregateCell>,
    pub partial_failures: usize,
    pub settings: Vec<String>,
    pub estimators: Vec<String>,
}

impl BenchmarkOutput {
    /// Aggregate mean for one (estimator, setting, metric) cell.
    pub fn mean_of(&self, estimator: &str, setting: &str, metric: &str) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|c| c.estimator == estimator && c.setting == setting && c.metric == metric)
            .map(|c| c.mean)
    }
}

/// A replication source resolved from the config.
enum SettingData {
    Gamma {
        gamma: f64,
        n: usize,
        p: usize,
        rho: f64,
        sigma2: f64,
        beta0_value: f64,
        beta1_value: f64,
    },
    Files {
        paths: Vec<PathBuf>,
        binary_outcome: Option<bool>,
        randomized: bool,
    },
}

struct Setting {
    label: String,
    data: SettingData,
}

fn resolve_settings(cfg: &BenchmarkConfig) -> Result<Vec<Setting>> {
    match &cfg.data {
        BenchmarkData::Synthetic {
            gammas,
            n,
            p,
            rho,
            sigma2,
            beta0_value,
            beta1_value,
        } => Ok(gammas
            .iter()
            .map(|&gamma| Setting {
                label: format!("gamma={gamma}"),
                data: SettingData::Gamma {
                    gamma,
                    n: *n,
                    p: *p,
                    rho: *rho,
                    sigma2: *sigma2,
                    beta0_value: *beta0_value,
                    beta1_value: *beta1_value,
                },
            })
            .collect()),
        BenchmarkData::Files {
            manifest,
            dir,
            binary_outcome,
            randomized,
        } => {
            let mut settings: Vec<Setting> = Vec::new();
            if let Some(manifest_path) = manifest {
                let manifest = load_manifest(manifest_path)?;
                let base = manifest_path.parent().unwrap_or(Path::new("."));
                let mut labels: Vec<String> = Vec::new();
                for entry in &manifest.entries {
                    let label = format!("gamma={}", entry.gamma_disp);
                    if !labels.contains(&label) {
                        labels.push(label);
                    }
                }
                for label in labels {
                    let mut paths: Vec<(usize, PathBuf)> = manifest
                        .entries
                        .iter()
                        .filter(|e| format!("gamma={}", e.gamma_disp) == label)
                        .map(|e| (e.replication_index, base.join(&e.path)))
                        .collect();
                    paths.sort_by_key(|(r, _)| *r);
                    settings.push(Setting {
                        label,
                        data: SettingData::Files {
                            paths: paths.into_iter().map(|(_, p)| p).collect(),
                            binary_outcome: *binary_outcome,
                            randomized: *randomized,
                        },
                    });
                }
            } else if let Some(dir_path) = dir {
                let mut paths: Vec<PathBuf> = fs::read_dir(dir_path)
                    .map_err(|e| Error::io(dir_path.display().to_string(), e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                    .collect();
                paths.sort();
                if paths.is_empty() {
                    return Err(Error::Config(format!(
                        "no CSV files found under {}",
                        dir_path.display()
                    )));
                }
                let label = dir_path
                    .file_name()
                    .map_or_else(|| "files".to_string(), |s| s.to_string_lossy().into_owned());
                settings.push(Setting {
                    label,
                    data: SettingData::Files {
                        paths,
                        binary_outcome: *binary_outcome,
                        randomized: *randomized,
                    },
                });
            }
            Ok(settings)
        }
    }
}

fn setting_dataset(
    setting: &Setting,
    cfg: &BenchmarkConfig,
    replication: usize,
) -> Result<(CausalDataset, Option<u64>)> {
    match &setting.data {
        SettingData::Gamma {
            gamma,
            n,
            p,
            rho,
            sigma2,
            beta0_value,
            beta1_value,
        } => {
            let seed = cfg.data_seed(replication);
            let ds = crate::dataset::generate_synthetic(&crate::dataset::SyntheticConfig {
                p: *p,
                n: *n,
                rho: *rho,
                sigma2: *sigma2,
                gamma_disp: *gamma,
                beta0: vec![*beta0_value; *p],
                beta1: vec![*beta1_value; *p],
                seed,
            })?;
            Ok((ds, Some(seed)))
        }
        SettingData::Files {
            paths,
            binary_outcome,
            randomized,
        } => {
            let path = paths.get(replication).ok_or_else(|| {
                Error::Config(format!(
                    "setting '{}' has only {} files but replication {} was requested",
                    setting.label,
                    paths.len(),
                    replication
                ))
            })?;
            let ds = load_csv(
                path,
                &LoadOptions {
                    name: None,
                    binary_outcome: *binary_outcome,
                    randomized: *randomized,
                },
            )?;
            Ok((ds, None))
        }
    }
}

struct EstimatorRun {
    report: EvalReport,
    repr_test: Option<Matrix>,
}

fn run_estimator(
    name: &str,
    cfg: &BenchmarkConfig,
    replication: usize,
    train_ds: &CausalDataset,
    valid_ds: &CausalDataset,
    within: &CausalDataset,
    test: &CausalDataset,
) -> Result<EstimatorRun> {
    match name {
        "pite" => {
            let mcfg = cfg.model.to_model_config(train_ds.dim());
            let tcfg = TrainConfig {
                seed: cfg.model_seed(replication),
                ..cfg.train.clone()
            };
            let fitres = fit(train_ds, valid_ds, &mcfg, &tcfg)?;
            let (w0, w1) = predict_outcomes(&fitres.params, &mcfg, &within.x, fitres.loss_kind)?;
            let (t0, t1) = predict_outcomes(&fitres.params, &mcfg, &test.x, fitres.loss_kind)?;
            let est_within = EstimatorOutput::new("pite", w0, w1);
            let est_test = EstimatorOutput::new("pite", t0, t1);
            let phi_test = encode(&fitres.params, &mcfg, &test.x)?;
            let report = evaluate(
                within,
                test,
                &est_within.tau_hat,
                &est_test.tau_hat,
                Some(&phi_test),
            )?;
            Ok(EstimatorRun {
                report,
                repr_test: Some(phi_test),
            })
        }
        "ols1" | "ols2" => {
            let run = if name == "ols1" { ols1 } else { ols2 };
            let est_within = run(within, &within.x)?;
            let est_test = run(within, &test.x)?;
            let report = evaluate(within, test, &est_within.tau_hat, &est_test.tau_hat, None)?;
            Ok(EstimatorRun {
                report,
                repr_test: None,
            })
        }
        "knn" => {
            let est_within = knn(
                within,
                &within.x,
                Some((&within.t, &within.y)),
                cfg.knn_k,
            )?;
            let est_test = knn(within, &test.x, None, cfg.knn_k)?;
            let report = evaluate(within, test, &est_within.tau_hat, &est_test.tau_hat, None)?;
            Ok(EstimatorRun {
                report,
                repr_test: None,
            })
        }
        other => Err(Error::Config(format!("unknown estimator '{other}'"))),
    }
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Runs one (setting, replication) cell for every estimator.
fn run_cell(
    cfg: &BenchmarkConfig,
    setting: &Setting,
    replication: usize,
) -> (Vec<RawRecord>, Vec<(String, Matrix)>) {
    let split_seed = cfg.split_spec(replication).seed;
    let model_seed = cfg.model_seed(replication);
    let mut records = Vec::with_capacity(cfg.estimators.len());
    let mut dumps = Vec::new();

    let base_record = |estimator: &str, data_seed: Option<u64>| RawRecord {
        setting: setting.label.clone(),
        replication,
        estimator: estimator.to_string(),
        data_seed,
        model_seed,
        split_seed,
        report: None,
        error: None,
    };

    let prepared = setting_dataset(setting, cfg, replication).and_then(|(ds, seed)| {
        let (train_ds, valid_ds, test) = split(&ds, &cfg.split_spec(replication))?;
        let within = train_ds.concat(&valid_ds)?;
        Ok((train_ds, valid_ds, within, test, seed))
    });

    match prepared {
        Err(e) => {
            for name in &cfg.estimators {
                let mut record = base_record(name, None);
                record.error = Some(e.to_string());
                records.push(record);
            }
        }
        Ok((train_ds, valid_ds, within, test, data_seed)) => {
            for name in &cfg.estimators {
                let mut record = base_record(name, data_seed);
                match run_estimator(name, cfg, replication, &train_ds, &valid_ds, &within, &test) {
                    Ok(run) => {
                        record.report = Some(run.report);
                        if cfg.dump_representations {
                            if let Some(phi) = run.repr_test {
                                let file = format!(
                                    "{}_{}_rep{replication:03}_test.csv",
                                    sanitize(&setting.label),
                                    name
                                );
                                dumps.push((file, phi));
                            }
                        }
                    }
                    Err(e) => record.error = Some(e.to_string()),
                }
                records.push(record);
            }
        }
    }
    (records, dumps)
}

fn sample_std(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

pub(crate) fn aggregate(
    records: &[RawRecord],
    estimators: &[String],
    settings: &[String],
) -> Vec<AggregateCell> {
    let mut cells = Vec::new();
    for estimator in estimators {
        for setting in settings {
            for metric in METRIC_COLUMNS {
                let values: Vec<f64> = records
                    .iter()
                    .filter(|r| &r.estimator == estimator && &r.setting == setting)
                    .filter_map(|r| r.report.as_ref().and_then(|rep| rep.metric(metric)))
                    .collect();
                if values.is_empty() {
                    continue;
                }
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let std = sample_std(&values, mean);
                cells.push(AggregateCell {
                    estimator: estimator.clone(),
                    setting: setting.clone(),
                    metric: metric.to_string(),
                    mean,
                    std,
                    n: values.len(),
                    degenerate_std: values.len() < 2,
                    formatted: format!("{mean:.2}({std:.2})"),
                });
            }
        }
    }
    cells
}

pub(crate) fn render_csv(cells: &[AggregateCell]) -> String {
    let mut out = String::from("estimator,setting,metric,mean,std,n,degenerate_std,formatted\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.estimator, c.setting, c.metric, c.mean, c.std, c.n, c.degenerate_std, c.formatted
        );
    }
    out
}

/// Publication-style text tables: one block per metric, methods as rows, settings
/// as columns, cells formatted mean(std).
pub(crate) fn render_text(
    cells: &[AggregateCell],
    estimators: &[String],
    settings: &[String],
) -> String {
    let mut out = String::new();
    for metric in METRIC_COLUMNS {
        let relevant: Vec<&AggregateCell> = cells.iter().filter(|c| c.metric == metric).collect();
        if relevant.is_empty() {
            continue;
        }
        let _ = writeln!(out, "metric: {metric}");
        let mut widths: Vec<usize> = settings.iter().map(String::len).collect();
        let method_width = estimators
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(6)
            .max("method".len());
        let cell_for = |est: &str, setting: &str| -> String {
            relevant
                .iter()
                .find(|c| c.estimator == est && c.setting == setting)
                .map_or(String::from("-"), |c| c.formatted.clone())
        };
        for (j, setting) in settings.iter().enumerate() {
            for est in estimators {
                widths[j] = widths[j].max(cell_for(est, setting).len());
            }
        }
        let _ = write!(out, "{:method_width$}", "method");
        for (j, setting) in settings.iter().enumerate() {
            let _ = write!(out, " | {:>width$}", setting, width = widths[j]);
        }
        out.push('\n');
        let total = method_width + widths.iter().map(|w| w + 3).sum::<usize>();
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for est in estimators {
            let _ = write!(out, "{est:method_width$}");
            for (j, setting) in settings.iter().enumerate() {
                let _ = write!(out, " | {:>width$}", cell_for(est, setting), width = widths[j]);
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Runs every estimator over every setting and replication, writes raw and
/// aggregate results plus tables, and returns them. Per-cell failures are
/// recorded and do not abort the run.
pub fn cmd_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkOutput> {
    cfg.validate()?;
    ensure_dir(&cfg.out_dir)?;
    let settings = resolve_settings(cfg)?;
    if settings.is_empty() {
        return Err(Error::Config("benchmark resolved zero settings".to_string()));
    }

    // Flatten (setting, replication) into independent tasks.
    let tasks: Vec<(usize, usize)> = (0..settings.len())
        .flat_map(|s| (0..cfg.replications).map(move |r| (s, r)))
        .collect();
    let results = run_indexed(tasks.len(), cfg.jobs, |i| {
        let (s, r) = tasks[i];
        run_cell(cfg, &settings[s], r)
    });

    let mut records = Vec::new();
    let mut dumps = Vec::new();
    for (cell_records, cell_dumps) in results {
        records.extend(cell_records);
        dumps.extend(cell_dumps);
    }

    if cfg.dump_representations && !dumps.is_empty() {
        let repr_dir = cfg.out_dir.join("repr");
        ensure_dir(&repr_dir)?;
        for (file, phi) in &dumps {
            let mut text = String::new();
            for j in 0..phi.cols() {
                if j > 0 {
                    text.push(',');
                }
                let _ = write!(text, "z{}", j + 1);
            }
            text.push('\n');
            for i in 0..phi.rows() {
                for (j, v) in phi.row(i).iter().enumerate() {
                    if j > 0 {
                        text.push(',');
                    }
                    let _ = write!(text, "{v}");
                }
                text.push('\n');
            }
            write_text(&repr_dir.join(file), &text)?;
        }
    }

    let setting_labels: Vec<String> = settings.iter().map(|s| s.label.clone()).collect();
    let aggregates = aggregate(&records, &cfg.estimators, &setting_labels);
    let partial_failures = records.iter().filter(|r| r.error.is_some()).count();

    write_json(&cfg.out_dir.join("results_raw.json"), &records)?;
    write_json(&cfg.out_dir.join("results_agg.json"), &aggregates)?;
    write_text(&cfg.out_dir.join("results_table.csv"), &render_csv(&aggregates))?;
    write_text(
        &cfg.out_dir.join("results_table.txt"),
        &render_text(&aggregates, &cfg.estimators, &setting_labels),
    )?;
    write_json(&cfg.out_dir.join("run_meta.json"), &RunMeta::new("benchmark", cfg.clone()))?;

    if partial_failures > 0 {
        eprintln!("warning: {partial_failures} estimator cells failed; see results_raw.json");
    }
    Ok(BenchmarkOutput {
        records,
        aggregates,
        partial_failures,
        settings: setting_labels,
        estimators: cfg.estimators.clone(),
    })
}
