use candle_core::{Device, Tensor};
use ndarray::Array2;

use crate::dataset::{PreprocessedImage, PreprocessingMode};
use crate::error::{Error, Result};

/// Inference view of an image classifier, split at named feature layers so
/// explanation methods can reach intermediate activations.
///
/// All forward methods run in inference mode and take NCHW batches already
/// in [`preprocessing_mode`](Self::preprocessing_mode) space.
pub trait ImageClassifier: Send + Sync {
    fn class_names(&self) -> &[String];

    fn preprocessing_mode(&self) -> PreprocessingMode;

    /// Layers with spatial feature maps, in forward order. The last one is
    /// the default Grad-CAM target.
    fn feature_layers(&self) -> Vec<String>;

    /// Named layers that exist but have no spatial extent.
    fn flat_layers(&self) -> Vec<String> {
        Vec::new()
    }

    /// Output of feature layer `layer` (an index into `feature_layers`).
    fn forward_until(&self, x: &Tensor, layer: usize) -> Result<Tensor>;

    /// Pre-softmax scores computed from the output of feature layer `layer`.
    fn forward_from(&self, features: &Tensor, layer: usize) -> Result<Tensor>;

    /// Pre-softmax scores, `B x num_classes`.
    fn logits(&self, x: &Tensor) -> Result<Tensor>;

    fn num_classes(&self) -> usize {
        self.class_names().len()
    }
}

/// Stacks HWC images into an NCHW tensor.
pub fn images_to_tensor(images: &[PreprocessedImage]) -> Result<Tensor> {
    let Some(first) = images.first() else {
        return Err(Error::InvalidConfig("cannot stack an empty batch".into()));
    };
    let (h, w) = (first.height(), first.width());
    let mut data = Vec::with_capacity(images.len() * 3 * h * w);
    for img in images {
        if img.height() != h || img.width() != w || img.pixels.shape()[2] != 3 {
            return Err(Error::InvalidConfig(format!(
                "batch mixes image sizes: {:?} vs {h}x{w}x3",
                img.pixels.shape()
            )));
        }
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    data.push(img.pixels[[y, x, c]]);
                }
            }
        }
    }
    Ok(Tensor::from_vec(data, (images.len(), 3, h, w), &Device::Cpu)?)
}

pub fn tensor_to_array2(t: &Tensor) -> Result<Array2<f32>> {
    let (r, c) = t.dims2()?;
    let data = t.flatten_all()?.to_vec1::<f32>()?;
    Ok(Array2::from_shape_vec((r, c), data).expect("dims match"))
}

pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    Ok(candle_nn::ops::softmax_last_dim(logits)?)
}

/// Class probabilities for a batch; rows follow `class_names()`.
///
/// Every image must be in the classifier's preprocessing mode. An empty
/// batch yields a `0 x num_classes` matrix.
pub fn predict_batch<M: ImageClassifier + ?Sized>(
    model: &M,
    images: &[PreprocessedImage],
) -> Result<Array2<f32>> {
    if images.is_empty() {
        return Ok(Array2::zeros((0, model.num_classes())));
    }
    let expected = model.preprocessing_mode();
    if let Some(img) = images.iter().find(|i| i.mode != expected) {
        return Err(Error::ModeMismatch {
            expected,
            found: img.mode,
        });
    }
    let x = images_to_tensor(images)?;
    tensor_to_array2(&softmax_rows(&model.logits(&x)?)?)
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}
