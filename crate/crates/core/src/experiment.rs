//! Declarative experiment files and per-run provenance records.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversarial::{AdversarialConfig, REFERENCE_EPSILONS};
use crate::dataset::SplitRatios;
use crate::error::{Error, Result};
use crate::model::{framework_version, hex_digest, Backbone, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            ratios: SplitRatios::PAPER.0,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversarialSection {
    pub epsilons: Vec<f64>,
    pub adv_fraction: f64,
}

impl Default for AdversarialSection {
    fn default() -> Self {
        Self {
            epsilons: REFERENCE_EPSILONS.to_vec(),
            adv_fraction: 0.5,
        }
    }
}

/// One experiment: where the data is, how to split it, how to train, and
/// where outputs go. Unset training keys take the reference values of the
/// chosen backbone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub dataset_root: PathBuf,
    pub output_dir: PathBuf,
    pub split: SplitSection,
    pub train: TrainConfig,
    pub adversarial: Option<AdversarialSection>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset_root: PathBuf::new(),
            output_dir: PathBuf::from("runs"),
            split: SplitSection::default(),
            train: TrainConfig::default(),
            adversarial: None,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    dataset_root: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    split: SplitSection,
    #[serde(default)]
    train: toml::Table,
    adversarial: Option<AdversarialSection>,
}

fn invalid(e: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(e.to_string())
}

/// Reference config for the table's backbone, overlaid with the table's keys.
pub fn train_config_from_table(table: &toml::Table) -> Result<TrainConfig> {
    let backbone = match table.get("backbone") {
        Some(toml::Value::String(s)) => s.parse()?,
        Some(other) => return Err(invalid(format!("backbone: expected a string, got {other}"))),
        None => Backbone::Xception,
    };
    let mut merged = toml::Table::try_from(TrainConfig::reference(backbone)).map_err(invalid)?;
    for (k, v) in table {
        merged.insert(k.clone(), v.clone());
    }
    let config: TrainConfig = toml::Value::Table(merged).try_into().map_err(|e| invalid(format!("train: {e}")))?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawExperiment = toml::from_str(text).map_err(invalid)?;
        let config = Self {
            dataset_root: raw.dataset_root.unwrap_or_default(),
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("runs")),
            split: raw.split,
            train: train_config_from_table(&raw.train)?,
            adversarial: raw.adversarial,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
            _ => e.into(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn split_ratios(&self) -> SplitRatios {
        SplitRatios(self.split.ratios)
    }

    pub fn validate(&self) -> Result<()> {
        self.split_ratios()
            .validate()
            .map_err(|e| invalid(format!("split.ratios: {e}")))?;
        self.train.validate()?;
        if let Some(adv) = &self.adversarial {
            self.adversarial_config_from(adv).validate()?;
        }
        Ok(())
    }

    fn adversarial_config_from(&self, adv: &AdversarialSection) -> AdversarialConfig {
        AdversarialConfig {
            epsilons: adv.epsilons.clone(),
            adv_fraction: adv.adv_fraction,
            base_train: self.train.clone(),
        }
    }

    /// The sweep settings, or the reference sweep when the file has none.
    pub fn adversarial_config(&self) -> AdversarialConfig {
        let section = self.adversarial.clone().unwrap_or_default();
        self.adversarial_config_from(&section)
    }

    pub fn digest(&self) -> String {
        hex_digest(&serde_json::to_vec(self).expect("config serializes"))
    }
}

/// Provenance written as `run.json` next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub run_id: String,
    pub args: Vec<String>,
    pub config_digest: Option<String>,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub framework_version: String,
    pub outputs: Vec<String>,
}

impl RunRecord {
    pub fn start(command: &str, run_id: &str, args: Vec<String>, seed: u64) -> Self {
        let now = timestamp();
        Self {
            command: command.to_string(),
            run_id: run_id.to_string(),
            args,
            config_digest: None,
            seed,
            started_at: now.clone(),
            finished_at: now,
            framework_version: framework_version(),
            outputs: Vec::new(),
        }
    }

    pub fn finish(&mut self) {
        self.finished_at = timestamp();
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("run.json"), serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
