//! Config-driven experiment harness: dataset generation, training runs,
//! replication benchmarks, hyperparameter sweeps, and report rendering.
//!
//! Every command takes a JSON config, echoes it (plus a config hash, seeds,
//! and the RNG generator name) into run metadata, and writes deterministic
//! outputs, so any run is replayable from its own metadata.

mod bench;
mod config;
mod generate;
mod report;
mod sweep;
mod train;

pub use bench::{cmd_benchmark, AggregateCell, BenchmarkOutput, RawRecord};
pub use config::{
    BenchmarkConfig, BenchmarkData, DataSource, GenerateConfig, GridSpec, ModelSpec, SweepConfig,
    TrainJobConfig,
};
pub use generate::{cmd_generate, Manifest, ManifestEntry};
pub use report::{cmd_report, ReportSummary};
pub use sweep::{cmd_sweep, SweepOutput, SweepRow};
pub use train::{cmd_train, TrainSummary};

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// FNV-1a over the canonical JSON encoding; recorded in run metadata so a
/// config change is always visible.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_string(cfg).unwrap_or_default();
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in json.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    format!("{hash:016x}")
}

pub(crate) fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numeric(format!("serialization failed: {e}")))?;
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column().to_string(),
        msg: e.to_string(),
    })
}

/// Run metadata written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunMeta<T: Serialize> {
    pub command: &'static str,
    pub package_version: &'static str,
    pub generator: &'static str,
    pub config_hash: String,
    pub config: T,
}

impl<T: Serialize> RunMeta<T> {
    pub fn new(command: &'static str, config: T) -> Self {
        RunMeta {
            command,
            package_version: env!("CARGO_PKG_VERSION"),
            generator: crate::rng::GENERATOR_NAME,
            config_hash: config_hash(&config),
            config,
        }
    }
}

/// Runs `count` independent tasks on up to `jobs` threads, preserving index
/// order in the returned vector. Tasks own their seeds, so parallel and
/// serial execution produce identical results.
pub(crate) fn run_indexed<T, F>(count: usize, jobs: usize, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let jobs = jobs.max(1).min(count.max(1));
    if jobs <= 1 {
        return (0..count).map(task).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<T>>> =
        (0..count).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let value = task(i);
                *slots[i].lock().unwrap() = Some(value);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("task completed"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_hash_changes_with_content() {
        #[derive(Serialize)]
        struct C {
            lr: f64,
        }
        let a = config_hash(&C { lr: 1e-3 });
        let b = config_hash(&C { lr: 2e-3 });
        assert_ne!(a, b);
        assert_eq!(a, config_hash(&C { lr: 1e-3 }));
    }

    #[test]
    fn run_indexed_matches_serial() {
        let serial = run_indexed(17, 1, |i| i * i);
        let parallel = run_indexed(17, 4, |i| i * i);
        assert_eq!(serial, parallel);
        assert_eq!(serial[16], 256);
    }
}
