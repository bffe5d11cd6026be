//! JSON config schema shared by the harness commands. Every field has a
//! default, so a minimal config file stays small while run metadata echoes
//! the fully resolved values.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::dataset::{LoadOptions, SplitSpec, SyntheticConfig};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::trainer::TrainConfig;

/// Architecture knobs; `input_dim` always comes from the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub repr_dim: usize,
    pub encoder_layers: Vec<usize>,
    pub head_layers: Vec<usize>,
    pub elu_alpha: f64,
    pub init_scale: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            repr_dim: 200,
            encoder_layers: vec![200, 200, 200],
            head_layers: vec![100, 100, 1],
            elu_alpha: 1.0,
            init_scale: 1.0,
        }
    }
}

impl ModelSpec {
    pub fn to_model_config(&self, input_dim: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            repr_dim: self.repr_dim,
            encoder_layers: self.encoder_layers.clone(),
            head_layers: self.head_layers.clone(),
            activation: Activation::Elu {
                alpha: self.elu_alpha,
            },
            init_scale: self.init_scale,
        }
    }
}

/// Where a single dataset comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        #[serde(default = "default_gamma")]
        gamma_disp: f64,
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_p")]
        p: usize,
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_sigma2")]
        sigma2: f64,
        #[serde(default = "default_beta0")]
        beta0_value: f64,
        #[serde(default = "default_beta1")]
        beta1_value: f64,
        #[serde(default)]
        seed: u64,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        binary_outcome: Option<bool>,
        #[serde(default)]
        randomized: bool,
    },
}

fn default_gamma() -> f64 {
    1.0
}
fn default_n() -> usize {
    800
}
fn default_p() -> usize {
    10
}
fn default_rho() -> f64 {
    0.2
}
fn default_sigma2() -> f64 {
    3.0
}
fn default_beta0() -> f64 {
    0.2
}
fn default_beta1() -> f64 {
    1.2
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            gamma_disp: default_gamma(),
            n: default_n(),
            p: default_p(),
            rho: default_rho(),
            sigma2: default_sigma2(),
            beta0_value: default_beta0(),
            beta1_value: default_beta1(),
            seed: 0,
        }
    }
}

impl DataSource {
    pub fn load(&self) -> Result<crate::dataset::CausalDataset> {
        match self {
            DataSource::Synthetic {
                gamma_disp,
                n,
                p,
                rho,
                sigma2,
                beta0_value,
                beta1_value,
                seed,
            } => crate::dataset::generate_synthetic(&SyntheticConfig {
                p: *p,
                n: *n,
                rho: *rho,
                sigma2: *sigma2,
                gamma_disp: *gamma_disp,
                beta0: vec![*beta0_value; *p],
                beta1: vec![*beta1_value; *p],
                seed: *seed,
            }),
            DataSource::Csv {
                path,
                binary_outcome,
                randomized,
            } => crate::dataset::load_csv(
                path,
                &LoadOptions {
                    name: None,
                    binary_outcome: *binary_outcome,
                    randomized: *randomized,
                },
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    pub gammas: Vec<f64>,
    pub replications: usize,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub sigma2: f64,
    pub beta0_value: f64,
    pub beta1_value: f64,
    pub seed_base: u64,
    pub out_dir: PathBuf,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            gammas: vec![0.4, 0.7, 1.0, 1.2],
            replications: 30,
            n: 800,
            p: 10,
            rho: 0.2,
            sigma2: 3.0,
            beta0_value: 0.2,
            beta1_value: 1.2,
            seed_base: 0,
            out_dir: PathBuf::from("runs/synthetic"),
        }
    }
}

impl GenerateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.replications == 0 {
            return Err(Error::Config(
                "need at least one gamma setting and one replication".to_string(),
            ));
        }
        Ok(())
    }

    pub fn synthetic_config(&self, gamma_disp: f64, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            p: self.p,
            n: self.n,
            rho: self.rho,
            sigma2: self.sigma2,
            gamma_disp,
            beta0: vec![self.beta0_value; self.p],
            beta1: vec![self.beta1_value; self.p],
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainJobConfig {
    pub dataset: DataSource,
    pub split: SplitSpec,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
}

impl Default for TrainJobConfig {
    fn default() -> Self {
        TrainJobConfig {
            dataset: DataSource::default(),
            split: SplitSpec::default(),
            model: ModelSpec::default(),
            train: TrainConfig::default(),
            out_dir: PathBuf::from("runs/train"),
        }
    }
}

/// Replicated data for a benchmark: either synthetic settings generated on
/// the fly, or a directory/manifest of CSV files treated as replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BenchmarkData {
    Synthetic {
        #[serde(default = "default_gammas")]
        gammas: Vec<f64>,
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_p")]
        p: usize,
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_sigma2")]
        sigma2: f64,
        #[serde(default = "default_beta0")]
        beta0_value: f64,
        #[serde(default = "default_beta1")]
        beta1_value: f64,
    },
    Files {
        /// Manifest written by `generate`.
        #[serde(default)]
        manifest: Option<PathBuf>,
        /// Or: directory of conforming CSVs, sorted by name, one per
        /// replication.
        #[serde(default)]
        dir: Option<PathBuf>,
        #[serde(default)]
        binary_outcome: Option<bool>,
        #[serde(default)]
        randomized: bool,
    },
}

fn default_gammas() -> Vec<f64> {
    vec![0.4, 0.7, 1.0, 1.2]
}

impl Default for BenchmarkData {
    fn default() -> Self {
        BenchmarkData::Synthetic {
            gammas: default_gammas(),
            n: default_n(),
            p: default_p(),
            rho: default_rho(),
            sigma2: default_sigma2(),
            beta0_value: default_beta0(),
            beta1_value: default_beta1(),
        }
    }
}

pub const KNOWN_ESTIMATORS: [&str; 4] = ["pite", "ols1", "ols2", "knn"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub data: BenchmarkData,
    pub estimators: Vec<String>,
    pub knn_k: usize,
    pub model: ModelSpec,
    /// Per-replication seeds are derived from `seed_base`; the `seed` field
    /// inside is overwritten per run.
    pub train: TrainConfig,
    pub train_frac: f64,
    pub valid_frac: f64,
    pub test_frac: f64,
    pub replications: usize,
    pub seed_base: u64,
    pub out_dir: PathBuf,
    pub dump_representations: bool,
    pub jobs: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            data: BenchmarkData::default(),
            estimators: KNOWN_ESTIMATORS.iter().map(|s| s.to_string()).collect(),
            knn_k: 5,
            model: ModelSpec::default(),
            train: TrainConfig::default(),
            train_frac: 0.63,
            valid_frac: 0.27,
            test_frac: 0.10,
            replications: 30,
            seed_base: 0,
            out_dir: PathBuf::from("runs/benchmark"),
            dump_representations: false,
            jobs: 1,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("need at least one replication".to_string()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("need at least one estimator".to_string()));
        }
        for name in &self.estimators {
            if !KNOWN_ESTIMATORS.contains(&name.as_str()) {
                return Err(Error::Config(format!(
                    "unknown estimator '{name}'; registered: {KNOWN_ESTIMATORS:?}"
                )));
            }
        }
        if let BenchmarkData::Files { manifest, dir, .. } = &self.data {
            if manifest.is_some() == dir.is_some() {
                return Err(Error::Config(
                    "file-based benchmarks need exactly one of 'manifest' or 'dir'".to_string(),
                ));
            }
        }
        self.split_spec(0).validate()?;
        Ok(())
    }

    /// Split seed for replication r: seed_base + 20000 + r (data uses
    /// seed_base + r, model init seed_base + 10000 + r).
    pub fn split_spec(&self, replication: usize) -> SplitSpec {
        SplitSpec {
            train_frac: self.train_frac,
            valid_frac: self.valid_frac,
            test_frac: self.test_frac,
            seed: self.seed_base + 20_000 + replication as u64,
        }
    }

    pub fn data_seed(&self, replication: usize) -> u64 {
        self.seed_base + replication as u64
    }

    pub fn model_seed(&self, replication: usize) -> u64 {
        self.seed_base + 10_000 + replication as u64
    }
}

/// Grid over the prototype-relevant hyperparameters; absent axes keep the
/// base config's value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub k: Option<Vec<usize>>,
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub gamma_div: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn is_empty(&self) -> bool {
        self.k.is_none()
            && self.alpha.is_none()
            && self.beta.is_none()
            && self.gamma_div.is_none()
            && self.lambda.is_none()
    }

    /// Cross product of the populated axes as (label, configured train
    /// config) pairs.
    pub fn settings(&self, base: &TrainConfig) -> Vec<(String, TrainConfig)> {
        let ks = self.k.clone().unwrap_or_else(|| vec![base.k]);
        let alphas = self.alpha.clone().unwrap_or_else(|| vec![base.alpha]);
        let betas = self.beta.clone().unwrap_or_else(|| vec![base.beta]);
        let gammas = self.gamma_div.clone().unwrap_or_else(|| vec![base.gamma_div]);
        let lambdas = self.lambda.clone().unwrap_or_else(|| vec![base.lambda]);
        let mut out = Vec::new();
        for &k in &ks {
            for &alpha in &alphas {
                for &beta in &betas {
                    for &gamma_div in &gammas {
                        for &lambda in &lambdas {
                            let mut cfg = base.clone();
                            cfg.k = k;
                            cfg.alpha = alpha;
                            cfg.beta = beta;
                            cfg.gamma_div = gamma_div;
                            cfg.lambda = lambda;
                            let mut parts = Vec::new();
                            if self.k.is_some() {
                                parts.push(format!("k={k}"));
                            }
                            if self.alpha.is_some() {
                                parts.push(format!("alpha={alpha}"));
                            }
                            if self.beta.is_some() {
                                parts.push(format!("beta={beta}"));
                            }
                            if self.gamma_div.is_some() {
                                parts.push(format!("gamma_div={gamma_div}"));
                            }
                            if self.lambda.is_some() {
                                parts.push(format!("lambda={lambda}"));
                            }
                            let label = if parts.is_empty() {
                                "base".to_string()
                            } else {
                                parts.join(",")
                            };
                            out.push((label, cfg));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub benchmark: BenchmarkConfig,
    #[serde(default)]
    pub grid: GridSpec,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_configs_parse_with_defaults() {
        let g: GenerateConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(g.gammas, vec![0.4, 0.7, 1.0, 1.2]);
        assert_eq!(g.replications, 30);

        let b: BenchmarkConfig =
            serde_json::from_str(r#"{"replications": 3, "estimators": ["ols1"]}"#).unwrap();
        assert_eq!(b.replications, 3);
        b.validate().unwrap();

        let bad: BenchmarkConfig =
            serde_json::from_str(r#"{"estimators": ["mystery"]}"#).unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn grid_cross_product_counts() {
        let grid: GridSpec =
            serde_json::from_str(r#"{"k": [3, 5, 8], "alpha": [0.5, 1.0]}"#).unwrap();
        let settings = grid.settings(&TrainConfig::default());
        assert_eq!(settings.len(), 6);
        assert!(settings[0].0.contains("k=3"));
        assert!(settings.iter().all(|(label, _)| label.contains("alpha=")));

        let singleton: GridSpec = serde_json::from_str(r#"{"k": [5]}"#).unwrap();
        assert_eq!(singleton.settings(&TrainConfig::default()).len(), 1);
    }

    #[test]
    fn csv_data_source_roundtrips_flags() {
        use crate::dataset::{generate_synthetic, write_csv, SyntheticConfig};
        let dir = std::env::temp_dir().join(format!("pite-source-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ds.csv");
        let ds = generate_synthetic(&SyntheticConfig {
            n: 40,
            p: 3,
            beta0: vec![0.2; 3],
            beta1: vec![1.2; 3],
            ..SyntheticConfig::default()
        })
        .unwrap();
        write_csv(&ds, &path).unwrap();
        let source = DataSource::Csv {
            path: path.clone(),
            binary_outcome: None,
            randomized: true,
        };
        let loaded = source.load().unwrap();
        assert_eq!(loaded.n(), 40);
        assert!(loaded.randomized);
        assert!(!loaded.binary_outcome);
        assert!(loaded.has_ground_truth());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn seed_scheme_is_documented_arithmetic() {
        let cfg = BenchmarkConfig {
            seed_base: 7,
            ..BenchmarkConfig::default()
        };
        assert_eq!(cfg.data_seed(3), 10);
        assert_eq!(cfg.model_seed(3), 10_010);
        assert_eq!(cfg.split_spec(3).seed, 20_010);
    }
}
