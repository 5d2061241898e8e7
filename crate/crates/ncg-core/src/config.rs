//! Experiment configuration documents (TOML) and gridsearch grids.
//!
//! The schema is strict: unknown keys are rejected everywhere. A config plus
//! a seed fully determines a run; the canonical serialization is hashed into
//! every report for provenance.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    encode_latency, load_features, load_idx, stratified_take, SpikeDataset,
};
use crate::engine::InhibitionScope;
use crate::error::{Error, Result};
use crate::plasticity::{Rule, RuleConfig};
use crate::regulation::CrMode;
use crate::rng;
use crate::synth::{self, SynthSpec};
use crate::training::{ThresholdConfig, TrainConfig};

/// Where the spike data comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    /// IDX image/label files under `mnist_dir`, latency-encoded.
    Idx,
    /// Precomputed NCGF feature files.
    Ncgf,
    /// The built-in multi-modal Gaussian benchmark.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mnist_dir: Option<PathBuf>,
    /// Encoding for dense inputs; only "latency" is defined.
    #[serde(default = "default_encoding")]
    pub encoding: String,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features_train: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features_test: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SynthSpec>,
    /// Optional stratified truncation of the loaded sets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_train_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_test_samples: Option<usize>,
}

fn default_encoding() -> String {
    "latency".to_string()
}

fn default_v_max() -> f64 {
    255.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub neurons_per_class: usize,
    #[serde(default)]
    pub labeling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSection {
    pub name: Rule,
    pub a_plus: f64,
    pub a_minus: f64,
    #[serde(default = "default_gap")]
    pub gap: f64,
    #[serde(default)]
    pub w_min: f64,
    #[serde(default = "default_w_max")]
    pub w_max: f64,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_target: Option<f64>,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default)]
    pub adaptive_lr: bool,
}

fn default_gap() -> f64 {
    0.2
}

fn default_w_max() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompetitionConfig {
    #[serde(default = "default_cr_mode")]
    pub mode: CrMode,
    /// Fixed test threshold; omitted = heuristic from the input count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default = "default_eta_th")]
    pub eta_th: f64,
    #[serde(default = "default_beta_th")]
    pub beta_th: f64,
}

fn default_cr_mode() -> CrMode {
    CrMode::Off
}

fn default_eta_th() -> f64 {
    0.05
}

fn default_beta_th() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    /// Inhibition scope; omitted = global for r-stdp, intra-group otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inhibition: Option<InhibitionScope>,
    #[serde(default)]
    pub seed: u64,
}

fn default_max_epochs() -> usize {
    30
}

fn default_patience() -> usize {
    10
}

fn default_validation_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub rule: RuleSection,
    #[serde(default = "default_competition")]
    pub competition: CompetitionConfig,
    pub training: TrainingSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

fn default_competition() -> CompetitionConfig {
    CompetitionConfig {
        mode: default_cr_mode(),
        theta: None,
        eta_th: default_eta_th(),
        beta_th: default_beta_th(),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Strict cross-field validation on top of the serde schema.
    pub fn validate(&self) -> Result<()> {
        match self.data.source {
            DataSource::Idx => {
                if self.data.mnist_dir.is_none() {
                    return Err(Error::schema("data.mnist_dir: required for source = \"idx\""));
                }
                if self.data.encoding != "latency" {
                    return Err(Error::Schema(format!(
                        "data.encoding: unknown encoding \"{}\"",
                        self.data.encoding
                    )));
                }
                if !(self.data.v_max > 0.0) {
                    return Err(Error::schema("data.v_max: must be > 0"));
                }
            }
            DataSource::Ncgf => {
                if self.data.features_train.is_none() || self.data.features_test.is_none() {
                    return Err(Error::schema(
                        "data.features_train and data.features_test: required for source = \"ncgf\"",
                    ));
                }
            }
            DataSource::Synthetic => {
                if self.data.synthetic.is_none() {
                    return Err(Error::schema(
                        "data.synthetic: required for source = \"synthetic\"",
                    ));
                }
            }
        }
        // Surface the training-level invariants as schema errors with a path.
        self.train_config(1).map_err(|e| match e {
            Error::Parameter(msg) => Error::Schema(format!("config: {msg}")),
            other => other,
        })?;
        if !(self.training.validation_fraction > 0.0 && self.training.validation_fraction < 1.0) {
            return Err(Error::schema("training.validation_fraction: must be in (0, 1)"));
        }
        Ok(())
    }

    /// Default fixed threshold: 15% of the expected input weight sum.
    pub fn resolve_theta(&self, n_inputs: usize) -> f64 {
        self.competition.theta.unwrap_or_else(|| {
            let expected_row_sum =
                n_inputs as f64 * (self.rule.w_min + self.rule.w_max) / 2.0;
            0.15 * expected_row_sum
        })
    }

    /// Materialize the runnable training configuration.
    pub fn train_config(&self, n_inputs: usize) -> Result<TrainConfig> {
        let scope = self.training.inhibition.unwrap_or(match self.rule.name {
            Rule::RStdp => InhibitionScope::Global,
            _ => InhibitionScope::IntraGroup,
        });
        let cfg = TrainConfig {
            rule: RuleConfig {
                rule: self.rule.name,
                a_plus: self.rule.a_plus,
                a_minus: self.rule.a_minus,
                gap: self.rule.gap,
                w_min: self.rule.w_min,
                w_max: self.rule.w_max,
                normalize: self.rule.normalize,
                norm_target: self.rule.norm_target,
                dropout: self.rule.dropout,
                adaptive_lr: self.rule.adaptive_lr,
            },
            threshold: ThresholdConfig {
                theta: self.resolve_theta(n_inputs),
                eta_th: self.competition.eta_th,
                beta_th: self.competition.beta_th,
                mode: self.competition.mode,
            },
            neurons_per_class: self.model.neurons_per_class,
            labeling: self.model.labeling,
            scope,
            max_epochs: self.training.max_epochs,
            patience: self.training.patience,
            seed: self.training.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load `(train, test)` according to the data section.
    pub fn load_data(&self) -> Result<(SpikeDataset, SpikeDataset)> {
        let (mut train, mut test) = match self.data.source {
            DataSource::Idx => {
                let dir = self.data.mnist_dir.as_ref().expect("validated");
                let train = encode_latency(
                    &load_idx(
                        &dir.join("train-images-idx3-ubyte"),
                        &dir.join("train-labels-idx1-ubyte"),
                    )?,
                    self.data.v_max,
                )?;
                let test = encode_latency(
                    &load_idx(
                        &dir.join("t10k-images-idx3-ubyte"),
                        &dir.join("t10k-labels-idx1-ubyte"),
                    )?,
                    self.data.v_max,
                )?;
                (train, test)
            }
            DataSource::Ncgf => {
                let train = load_features(self.data.features_train.as_ref().expect("validated"))?;
                let test = load_features(self.data.features_test.as_ref().expect("validated"))?;
                (train, test)
            }
            DataSource::Synthetic => {
                let spec = self.data.synthetic.as_ref().expect("validated");
                synth::generate(spec, rng::derive_seed(self.training.seed, "data", 0))?
            }
        };
        if train.n_inputs() != test.n_inputs() || train.n_classes() != test.n_classes() {
            return Err(Error::consistency("train and test sets disagree on shape"));
        }
        if let Some(n) = self.data.max_train_samples {
            if n < train.len() {
                train = stratified_take(&train, n, rng::derive_seed(self.training.seed, "truncate", 0))?;
            }
        }
        if let Some(n) = self.data.max_test_samples {
            if n < test.len() {
                test = stratified_take(&test, n, rng::derive_seed(self.training.seed, "truncate", 1))?;
            }
        }
        Ok((train, test))
    }

    /// Canonical serialization: field order is fixed by the schema.
    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, hex-encoded.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A gridsearch space: parameter name -> candidate values, enumerated
/// deterministically (names sorted, values in file order, first name is the
/// most significant digit).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpace {
    params: Vec<(String, Vec<f64>)>,
}

/// Upper bound on exhaustive-search size.
pub const MAX_GRID_CELLS: usize = 100_000;

/// Parameters a grid may vary.
pub const GRID_PARAMETERS: &[&str] = &[
    "a_plus",
    "a_minus",
    "gap",
    "w_min",
    "w_max",
    "norm_target",
    "dropout",
    "theta",
    "eta_th",
    "beta_th",
    "neurons_per_class",
    "max_epochs",
    "patience",
];

impl GridSpace {
    /// Parse a grid document: a flat TOML table of `name = [values...]`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::schema(e.to_string()))?;
        let mut params = Vec::new();
        for (name, value) in table {
            if !GRID_PARAMETERS.contains(&name.as_str()) {
                return Err(Error::Schema(format!(
                    "grid: unknown parameter \"{name}\" (known: {})",
                    GRID_PARAMETERS.join(", ")
                )));
            }
            let toml::Value::Array(items) = value else {
                return Err(Error::Schema(format!("grid: \"{name}\" must be an array")));
            };
            if items.is_empty() {
                return Err(Error::Schema(format!("grid: \"{name}\" has no values")));
            }
            let mut values = Vec::with_capacity(items.len());
            for item in items {
                let v = match item {
                    toml::Value::Float(f) => f,
                    toml::Value::Integer(i) => i as f64,
                    other => {
                        return Err(Error::Schema(format!(
                            "grid: \"{name}\" holds non-numeric value {other}"
                        )))
                    }
                };
                if !v.is_finite() {
                    return Err(Error::Schema(format!("grid: \"{name}\" holds non-finite value")));
                }
                values.push(v);
            }
            params.push((name, values));
        }
        if params.is_empty() {
            return Err(Error::parameter("empty grid"));
        }
        let cells = params
            .iter()
            .try_fold(1usize, |acc, (_, v)| acc.checked_mul(v.len()))
            .filter(|&c| c <= MAX_GRID_CELLS);
        if cells.is_none() {
            return Err(Error::Schema(format!(
                "grid: more than {MAX_GRID_CELLS} cells"
            )));
        }
        params.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(GridSpace { params })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Number of cells in the Cartesian product.
    pub fn len(&self) -> usize {
        self.params.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// All cells in deterministic enumeration order.
    pub fn combinations(&self) -> Vec<Vec<(String, f64)>> {
        let mut combos = vec![Vec::new()];
        for (name, values) in &self.params {
            let mut next = Vec::with_capacity(combos.len() * values.len());
            for combo in &combos {
                for &v in values {
                    let mut c = combo.clone();
                    c.push((name.clone(), v));
                    next.push(c);
                }
            }
            combos = next;
        }
        combos
    }
}

fn as_positive_int(name: &str, value: f64, min: usize) -> Result<usize> {
    if value.fract() != 0.0 || value < min as f64 || value > usize::MAX as f64 {
        return Err(Error::Schema(format!(
            "grid: \"{name}\" = {value} must be an integer >= {min}"
        )));
    }
    Ok(value as usize)
}

/// Apply one grid setting onto an experiment document (for emitting the
/// gridsearch winner as a ready-to-run config).
pub fn apply_grid_setting_experiment(
    cfg: &mut ExperimentConfig,
    name: &str,
    value: f64,
) -> Result<()> {
    match name {
        "a_plus" => cfg.rule.a_plus = value,
        "a_minus" => cfg.rule.a_minus = value,
        "gap" => cfg.rule.gap = value,
        "w_min" => cfg.rule.w_min = value,
        "w_max" => cfg.rule.w_max = value,
        "norm_target" => cfg.rule.norm_target = Some(value),
        "dropout" => cfg.rule.dropout = value,
        "theta" => cfg.competition.theta = Some(value),
        "eta_th" => cfg.competition.eta_th = value,
        "beta_th" => cfg.competition.beta_th = value,
        "neurons_per_class" => cfg.model.neurons_per_class = as_positive_int(name, value, 1)?,
        "max_epochs" => cfg.training.max_epochs = as_positive_int(name, value, 1)?,
        "patience" => cfg.training.patience = as_positive_int(name, value, 1)?,
        other => return Err(Error::Schema(format!("grid: unknown parameter \"{other}\""))),
    }
    Ok(())
}

/// Apply one grid setting onto a training configuration.
pub fn apply_grid_setting(cfg: &mut TrainConfig, name: &str, value: f64) -> Result<()> {
    match name {
        "a_plus" => cfg.rule.a_plus = value,
        "a_minus" => cfg.rule.a_minus = value,
        "gap" => cfg.rule.gap = value,
        "w_min" => cfg.rule.w_min = value,
        "w_max" => cfg.rule.w_max = value,
        "norm_target" => cfg.rule.norm_target = Some(value),
        "dropout" => cfg.rule.dropout = value,
        "theta" => cfg.threshold.theta = value,
        "eta_th" => cfg.threshold.eta_th = value,
        "beta_th" => cfg.threshold.beta_th = value,
        "neurons_per_class" => cfg.neurons_per_class = as_positive_int(name, value, 1)?,
        "max_epochs" => cfg.max_epochs = as_positive_int(name, value, 1)?,
        "patience" => cfg.patience = as_positive_int(name, value, 1)?,
        other => return Err(Error::Schema(format!("grid: unknown parameter \"{other}\""))),
    }
    Ok(())
}
