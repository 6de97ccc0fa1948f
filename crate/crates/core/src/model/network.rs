use std::fmt;

use candle_core::Tensor;

use super::backbone::{Stages, Widths};
use super::classifier::ImageClassifier;
use super::config::{Backbone, TrainConfig};
use super::layers::{global_avg_pool, Linear, Phase};
use super::params::ParamStore;
use super::{inception, xception};
use crate::dataset::PreprocessingMode;
use crate::error::{Error, Result};

pub const HEAD_PREFIX: &str = "head.";

/// Backbone feature extractor plus a global-average-pool / dense head.
pub struct Network {
    config: TrainConfig,
    class_names: Vec<String>,
    params: ParamStore,
    stages: Stages,
    head: Linear,
    feature_dim: usize,
}

impl fmt::Debug for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Network")
            .field("backbone", &self.config.backbone)
            .field("classes", &self.class_names)
            .field("feature_dim", &self.feature_dim)
            .field("parameters", &self.params.num_parameters())
            .finish()
    }
}

/// Builds an untrained classifier. Backbone weights come from
/// `config.pretrained_weights` when set, otherwise from seeded He init; the
/// head is always freshly initialized from `config.seed`.
pub fn build_classifier(config: &TrainConfig) -> Result<Network> {
    config.validate()?;
    let mut params = ParamStore::new(config.seed);
    let widths = Widths(config.width_multiplier);
    let (stages, feature_dim) = match config.backbone {
        Backbone::Xception => xception::build(&mut params, widths)?,
        Backbone::InceptionV3 => inception::build(&mut params, widths)?,
    };
    let head = Linear::new(&mut params, "head", feature_dim, config.num_classes)?;

    if let Some(path) = &config.pretrained_weights {
        let loaded = params.load(path, false)?;
        if loaded == 0 {
            return Err(Error::Artifact {
                path: path.clone(),
                reason: format!("no tensor matches a {} parameter name", config.backbone),
            });
        }
        log::info!("loaded {loaded} pretrained tensors from {}", path.display());
    }

    Ok(Network {
        config: config.clone(),
        class_names: (0..config.num_classes).map(|i| format!("class_{i}")).collect(),
        params,
        stages,
        head,
        feature_dim,
    })
}

impl Network {
    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.params.names().map(str::to_string).collect()
    }

    pub fn set_class_names(&mut self, names: Vec<String>) -> Result<()> {
        if names.len() != self.config.num_classes {
            return Err(Error::InvalidConfig(format!(
                "num_classes is {} but {} class names were given",
                self.config.num_classes,
                names.len()
            )));
        }
        self.class_names = names;
        Ok(())
    }

    /// Final backbone feature map.
    pub fn features(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        let mut y = x.clone();
        for (_, stage) in &self.stages {
            y = stage.forward(&y, phase)?;
        }
        Ok(y)
    }

    /// Sets every batch-norm layer's running statistics to those of `x`,
    /// one stage at a time.
    pub fn calibrate_batch_norm(&self, x: &Tensor) -> Result<()> {
        let mut y = x.detach();
        for (_, stage) in &self.stages {
            y = stage.forward(&y, Phase::Calibrate)?.detach();
        }
        Ok(())
    }

    /// Head applied to a final feature map.
    pub fn head_logits(&self, features: &Tensor) -> Result<Tensor> {
        self.head.forward(&global_avg_pool(features)?)
    }

    /// Head applied to already pooled `B x feature_dim` features.
    pub fn head_from_pooled(&self, pooled: &Tensor) -> Result<Tensor> {
        self.head.forward(pooled)
    }

    pub fn pooled_features(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        global_avg_pool(&self.features(x, phase)?)
    }

    pub fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor> {
        self.head_logits(&self.features(x, phase)?)
    }
}

impl ImageClassifier for Network {
    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn preprocessing_mode(&self) -> PreprocessingMode {
        self.config.preprocessing_mode
    }

    fn feature_layers(&self) -> Vec<String> {
        self.stages.iter().map(|(n, _)| n.clone()).collect()
    }

    fn flat_layers(&self) -> Vec<String> {
        vec!["global_pool".into(), "head".into()]
    }

    fn forward_until(&self, x: &Tensor, layer: usize) -> Result<Tensor> {
        let mut y = x.clone();
        for (_, stage) in self.stages.iter().take(layer + 1) {
            y = stage.forward(&y, Phase::Eval)?;
        }
        Ok(y)
    }

    fn forward_from(&self, features: &Tensor, layer: usize) -> Result<Tensor> {
        let mut y = features.clone();
        for (_, stage) in self.stages.iter().skip(layer + 1) {
            y = stage.forward(&y, Phase::Eval)?;
        }
        self.head_logits(&y)
    }

    fn logits(&self, x: &Tensor) -> Result<Tensor> {
        self.forward(x, Phase::Eval)
    }
}
