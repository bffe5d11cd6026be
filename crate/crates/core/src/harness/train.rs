//! `train`: one training run with checkpoint, JSON-lines log, and metadata.

use std::fmt::Write as _;
use std::fs;

use serde::Serialize;

use crate::dataset::split;
use crate::error::{Error, Result};
use crate::trainer::{fit, Checkpoint};

use super::config::TrainJobConfig;
use super::{ensure_dir, write_json, RunMeta};

#[derive(Clone, Debug, Serialize)]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_valid_loss: f64,
    pub checkpoint: String,
    pub log: String,
}

/// Splits the configured dataset, trains, and writes `checkpoint.json`,
/// `train_log.jsonl` (one record per epoch), and `run_meta.json`.
pub fn cmd_train(cfg: &TrainJobConfig) -> Result<TrainSummary> {
    ensure_dir(&cfg.out_dir)?;
    let ds = cfg.dataset.load()?;
    let (train, valid, _test) = split(&ds, &cfg.split)?;
    let mcfg = cfg.model.to_model_config(ds.dim());
    let result = fit(&train, &valid, &mcfg, &cfg.train)?;

    let ck_path = cfg.out_dir.join("checkpoint.json");
    Checkpoint::from_fit(&mcfg, &cfg.train, &result).save(&ck_path)?;

    let log_path = cfg.out_dir.join("train_log.jsonl");
    let mut log = String::new();
    for record in &result.history {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::Numeric(format!("log serialization failed: {e}")))?;
        let _ = writeln!(log, "{line}");
    }
    fs::write(&log_path, log).map_err(|e| Error::io(log_path.display().to_string(), e))?;

    write_json(&cfg.out_dir.join("run_meta.json"), &RunMeta::new("train", cfg.clone()))?;

    Ok(TrainSummary {
        epochs_run: result.history.len(),
        best_epoch: result.best_epoch,
        best_valid_loss: result.history[result.best_epoch].valid_loss,
        checkpoint: ck_path.display().to_string(),
        log: log_path.display().to_string(),
    })
}
