use std::fs;
use std::path::{Path, PathBuf};

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use super::classifier::ImageClassifier;
use super::config::{Backbone, TrainConfig};
use super::network::{build_classifier, Network};
use crate::dataset::PreprocessingMode;
use crate::error::{Error, Result};

pub const WEIGHTS_FILE: &str = "weights.safetensors";
pub const METADATA_FILE: &str = "metadata.json";

pub fn framework_version() -> String {
    format!("leaflife-core {} (candle 0.11)", env!("CARGO_PKG_VERSION"))
}

/// Adversarial-training settings recorded with a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarialProvenance {
    pub epsilon: f64,
    pub adv_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMetadata {
    pub backbone: Backbone,
    pub class_names: Vec<String>,
    pub preprocessing_mode: PreprocessingMode,
    pub train_config_digest: String,
    pub created_at: String,
    pub framework_version: String,
    pub train_config: TrainConfig,
    #[serde(default)]
    pub adversarial: Option<AdversarialProvenance>,
    /// Mean training pixel in `[0, 1]` space, the default occlusion fill.
    #[serde(default)]
    pub mean_pixel_unit: Option<f32>,
}

/// A trained classifier plus everything needed to rebuild it.
#[derive(Debug)]
pub struct TrainedModelArtifact {
    pub metadata: ArtifactMetadata,
    network: Network,
}

impl TrainedModelArtifact {
    pub fn new(network: Network, adversarial: Option<AdversarialProvenance>) -> Self {
        let config = network.config().clone();
        let metadata = ArtifactMetadata {
            backbone: config.backbone,
            class_names: network.class_names().to_vec(),
            preprocessing_mode: config.preprocessing_mode,
            train_config_digest: config.digest(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            framework_version: framework_version(),
            train_config: config,
            adversarial,
            mean_pixel_unit: None,
        };
        Self { metadata, network }
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn is_adversarially_trained(&self) -> bool {
        self.metadata.adversarial.is_some_and(|a| a.epsilon > 0.0)
    }

    /// Writes `weights.safetensors` and `metadata.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        self.network.params().save(dir.join(WEIGHTS_FILE))?;
        fs::write(
            dir.join(METADATA_FILE),
            serde_json::to_vec_pretty(&self.metadata)?,
        )?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let err = |path: PathBuf, reason: String| Error::Artifact { path, reason };
        let meta_path = dir.join(METADATA_FILE);
        let bytes = fs::read(&meta_path).map_err(|e| err(meta_path.clone(), e.to_string()))?;
        let metadata: ArtifactMetadata = serde_json::from_slice(&bytes)
            .map_err(|e| err(meta_path.clone(), format!("malformed metadata: {e}")))?;
        if metadata.class_names.len() != metadata.train_config.num_classes {
            return Err(err(
                meta_path,
                format!(
                    "{} class names for a {}-way head",
                    metadata.class_names.len(),
                    metadata.train_config.num_classes
                ),
            ));
        }
        let config = TrainConfig {
            pretrained_weights: None,
            ..metadata.train_config.clone()
        };
        let mut network = build_classifier(&config)?;
        network.params().load(dir.join(WEIGHTS_FILE), true)?;
        network.set_class_names(metadata.class_names.clone())?;
        Ok(Self { metadata, network })
    }
}

impl ImageClassifier for TrainedModelArtifact {
    fn class_names(&self) -> &[String] {
        &self.metadata.class_names
    }

    fn preprocessing_mode(&self) -> PreprocessingMode {
        self.metadata.preprocessing_mode
    }

    fn feature_layers(&self) -> Vec<String> {
        self.network.feature_layers()
    }

    fn flat_layers(&self) -> Vec<String> {
        self.network.flat_layers()
    }

    fn forward_until(&self, x: &Tensor, layer: usize) -> Result<Tensor> {
        self.network.forward_until(x, layer)
    }

    fn forward_from(&self, features: &Tensor, layer: usize) -> Result<Tensor> {
        self.network.forward_from(features, layer)
    }

    fn logits(&self, x: &Tensor) -> Result<Tensor> {
        self.network.logits(x)
    }
}
