use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::PreprocessingMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Backbone {
    InceptionV3,
    Xception,
}

impl Backbone {
    pub fn as_str(self) -> &'static str {
        match self {
            Backbone::InceptionV3 => "inception_v3",
            Backbone::Xception => "xception",
        }
    }
}

impl fmt::Display for Backbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Backbone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "inception_v3" | "inceptionv3" => Ok(Backbone::InceptionV3),
            "xception" => Ok(Backbone::Xception),
            _ => Err(Error::UnsupportedBackbone(s.to_string())),
        }
    }
}

impl TryFrom<String> for Backbone {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Backbone> for String {
    fn from(b: Backbone) -> String {
        b.as_str().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarlyStopMonitor {
    #[default]
    ValLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    #[default]
    None,
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub backbone: Backbone,
    pub num_classes: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub early_stop_monitor: EarlyStopMonitor,
    pub seed: u64,
    pub freeze_backbone: bool,
    pub augmentation: Augmentation,
    /// Optional per-class loss weights; `None` trains unweighted.
    pub class_weights: Option<Vec<f32>>,
    /// Scales every convolution width. `1.0` is the published architecture;
    /// smaller values give desk-scale variants for CPU experiments.
    pub width_multiplier: f64,
    /// Safetensors file with pretrained backbone weights, named as in
    /// [`crate::model::Network::parameter_names`].
    pub pretrained_weights: Option<PathBuf>,
    pub preprocessing_mode: PreprocessingMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::reference(Backbone::Xception)
    }
}

impl TrainConfig {
    /// Reference hyperparameters: Adam at 1e-4, batch 32, patience 5, and
    /// an epoch cap of 45 for InceptionV3 and 54 for Xception.
    pub fn reference(backbone: Backbone) -> Self {
        Self {
            backbone,
            num_classes: 4,
            batch_size: 32,
            learning_rate: 1e-4,
            max_epochs: match backbone {
                Backbone::InceptionV3 => 45,
                Backbone::Xception => 54,
            },
            early_stop_patience: 5,
            early_stop_monitor: EarlyStopMonitor::ValLoss,
            seed: 42,
            freeze_backbone: false,
            augmentation: Augmentation::None,
            class_weights: None,
            width_multiplier: 1.0,
            pretrained_weights: None,
            preprocessing_mode: PreprocessingMode::ScaleSymmetric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::InvalidConfig(format!("{field}: {msg}")));
        if self.num_classes < 2 {
            return bad("num_classes", format!("must be >= 2, got {}", self.num_classes));
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be >= 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate", format!("must be > 0, got {}", self.learning_rate));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs", "must be >= 1".into());
        }
        if !(self.width_multiplier.is_finite() && self.width_multiplier > 0.0) {
            return bad(
                "width_multiplier",
                format!("must be > 0, got {}", self.width_multiplier),
            );
        }
        if let Some(w) = &self.class_weights {
            if w.len() != self.num_classes || w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return bad(
                    "class_weights",
                    format!("need {} finite non-negative values", self.num_classes),
                );
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex_digest(&json)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let x = TrainConfig::reference(Backbone::Xception);
        assert_eq!(x.batch_size, 32);
        assert_eq!(x.learning_rate, 1e-4);
        assert_eq!(x.early_stop_patience, 5);
        assert_eq!(x.max_epochs, 54);
        assert_eq!(TrainConfig::reference(Backbone::InceptionV3).max_epochs, 45);
    }

    #[test]
    fn unknown_backbone_is_rejected() {
        assert!(matches!(
            "resnet50".parse::<Backbone>(),
            Err(Error::UnsupportedBackbone(_))
        ));
        let parsed: std::result::Result<TrainConfig, _> = toml::from_str("backbone = \"vgg\"");
        assert!(parsed.unwrap_err().to_string().contains("unsupported backbone"));
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = TrainConfig::default();
        c.batch_size = 0;
        assert!(c.validate().unwrap_err().to_string().contains("batch_size"));
        c = TrainConfig::default();
        c.num_classes = 1;
        assert!(c.validate().unwrap_err().to_string().contains("num_classes"));
    }

    #[test]
    fn digest_tracks_content() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed += 1;
        assert_ne!(a.digest(), b.digest());
    }
}
