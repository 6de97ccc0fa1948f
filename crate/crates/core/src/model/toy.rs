//! Small classifiers with hand-set weights, used as reference models where
//! gradients and explanations can be computed by hand.

use candle_core::{Device, Tensor};

use super::classifier::ImageClassifier;
use crate::dataset::PreprocessingMode;
use crate::error::{Error, Result};

/// `logits = W * flatten(x) + b`; no spatial layers.
#[derive(Debug, Clone)]
pub struct LinearSoftmax {
    weight: Tensor,
    bias: Tensor,
    class_names: Vec<String>,
    mode: PreprocessingMode,
}

impl LinearSoftmax {
    /// `weight` is `classes x (3*h*w)` in row-major order, `bias` has one
    /// entry per class.
    pub fn new(weight: Vec<f32>, bias: Vec<f32>, mode: PreprocessingMode) -> Result<Self> {
        let classes = bias.len();
        if classes == 0 || !weight.len().is_multiple_of(classes) {
            return Err(Error::InvalidConfig("weight is not classes x features".into()));
        }
        let features = weight.len() / classes;
        Ok(Self {
            weight: Tensor::from_vec(weight, (classes, features), &Device::Cpu)?,
            bias: Tensor::from_vec(bias, classes, &Device::Cpu)?,
            class_names: (0..classes).map(|i| format!("class_{i}")).collect(),
            mode,
        })
    }
}

impl ImageClassifier for LinearSoftmax {
    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn preprocessing_mode(&self) -> PreprocessingMode {
        self.mode
    }

    fn feature_layers(&self) -> Vec<String> {
        Vec::new()
    }

    fn flat_layers(&self) -> Vec<String> {
        vec!["linear".into()]
    }

    fn forward_until(&self, x: &Tensor, _layer: usize) -> Result<Tensor> {
        Ok(x.clone())
    }

    fn forward_from(&self, features: &Tensor, _layer: usize) -> Result<Tensor> {
        self.logits(features)
    }

    fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let flat = x.flatten_from(1)?;
        Ok(flat.matmul(&self.weight.t()?)?.broadcast_add(&self.bias)?)
    }
}

/// One 1x1 convolution (no nonlinearity) named `"conv"`, then global
/// average pooling and a dense layer.
#[derive(Debug, Clone)]
pub struct ToyConvNet {
    conv: Tensor,
    head_weight: Tensor,
    head_bias: Tensor,
    class_names: Vec<String>,
    mode: PreprocessingMode,
}

impl ToyConvNet {
    /// `conv` is `channels x 3`, `head_weight` is `classes x channels`.
    pub fn new(
        conv: Vec<f32>,
        head_weight: Vec<f32>,
        head_bias: Vec<f32>,
        mode: PreprocessingMode,
    ) -> Result<Self> {
        let channels = conv.len() / 3;
        let classes = head_bias.len();
        if channels == 0 || conv.len() != channels * 3 || head_weight.len() != classes * channels {
            return Err(Error::InvalidConfig("inconsistent toy network shapes".into()));
        }
        Ok(Self {
            conv: Tensor::from_vec(conv, (channels, 3, 1, 1), &Device::Cpu)?,
            head_weight: Tensor::from_vec(head_weight, (classes, channels), &Device::Cpu)?,
            head_bias: Tensor::from_vec(head_bias, classes, &Device::Cpu)?,
            class_names: (0..classes).map(|i| format!("class_{i}")).collect(),
            mode,
        })
    }

    /// Same network with `shift` added to every class score.
    pub fn with_logit_shift(&self, shift: f32) -> Result<Self> {
        let mut out = self.clone();
        out.head_bias = (&self.head_bias + shift as f64)?;
        Ok(out)
    }
}

impl ImageClassifier for ToyConvNet {
    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn preprocessing_mode(&self) -> PreprocessingMode {
        self.mode
    }

    fn feature_layers(&self) -> Vec<String> {
        vec!["conv".into()]
    }

    fn flat_layers(&self) -> Vec<String> {
        vec!["global_pool".into(), "head".into()]
    }

    fn forward_until(&self, x: &Tensor, _layer: usize) -> Result<Tensor> {
        Ok(x.conv2d(&self.conv, 0, 1, 1, 1)?)
    }

    fn forward_from(&self, features: &Tensor, _layer: usize) -> Result<Tensor> {
        let pooled = features.mean(3)?.mean(2)?;
        Ok(pooled
            .matmul(&self.head_weight.t()?)?
            .broadcast_add(&self.head_bias)?)
    }

    fn logits(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_from(&self.forward_until(x, 0)?, 0)
    }
}
