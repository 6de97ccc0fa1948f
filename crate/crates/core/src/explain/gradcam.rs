use candle_core::{Tensor, Var, D};
use ndarray::Array2;

use super::{bilinear_resize, normalize, resolve_target, Explanation, ExplanationMethod, TargetClass};
use crate::dataset::PreprocessedImage;
use crate::error::{Error, Result};
use crate::model::{images_to_tensor, softmax_rows, ImageClassifier};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LayerSelector {
    /// The deepest spatial layer of the model.
    #[default]
    LastConv,
    Named(String),
}

/// Which class score the gradients are taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CamScore {
    #[default]
    Logit,
    Probability,
}

fn resolve_layer<M: ImageClassifier + ?Sized>(model: &M, layer: &LayerSelector) -> Result<(usize, String)> {
    let layers = model.feature_layers();
    match layer {
        LayerSelector::LastConv => layers
            .last()
            .map(|name| (layers.len() - 1, name.clone()))
            .ok_or_else(|| Error::InvalidLayer("model has no spatial feature layer".into())),
        LayerSelector::Named(name) => {
            if let Some(i) = layers.iter().position(|l| l == name) {
                Ok((i, name.clone()))
            } else if model.flat_layers().contains(name) {
                Err(Error::InvalidLayer(format!("layer {name:?} has no spatial extent")))
            } else {
                Err(Error::InvalidLayer(format!("unknown layer {name:?}")))
            }
        }
    }
}

/// Gradient-weighted class activation map for one image.
///
/// The map is `ReLU(sum_k a_k * A_k)` where `A_k` are the chosen layer's
/// channels and `a_k` the spatial mean of the score's gradient over `A_k`.
/// It is upsampled bilinearly to the image size and min-max normalized.
pub fn grad_cam<M: ImageClassifier + ?Sized>(
    model: &M,
    image: &PreprocessedImage,
    target: TargetClass,
    layer: &LayerSelector,
    score: CamScore,
) -> Result<Explanation> {
    let (layer_idx, layer_name) = resolve_layer(model, layer)?;
    if image.mode != model.preprocessing_mode() {
        return Err(Error::ModeMismatch {
            expected: model.preprocessing_mode(),
            found: image.mode,
        });
    }
    let target_class = resolve_target(model, image, target)?;

    let x = images_to_tensor(std::slice::from_ref(image))?;
    let activations = model.forward_until(&x, layer_idx)?.detach();
    let (_, _, h, w) = activations.dims4().map_err(|_| {
        Error::InvalidLayer(format!("layer {layer_name:?} output is not a feature map"))
    })?;
    let var = Var::from_tensor(&activations)?;
    let logits = model.forward_from(var.as_tensor(), layer_idx)?;
    let scores = match score {
        CamScore::Logit => logits,
        CamScore::Probability => softmax_rows(&logits)?,
    };
    let y = scores.narrow(D::Minus1, target_class, 1)?.sum_all()?;
    let grads = y.backward()?;
    let grad = match grads.get(var.as_tensor()) {
        Some(g) => g.clone(),
        None => Tensor::zeros_like(&activations)?,
    };

    let weights = grad.mean_keepdim(3)?.mean_keepdim(2)?.flatten_all()?.to_vec1::<f32>()?;
    let acts = activations.flatten_all()?.to_vec1::<f32>()?;
    let mut raw = Array2::<f32>::zeros((h, w));
    for (i, r) in raw.iter_mut().enumerate() {
        let mut s = 0.0f32;
        for (c, a) in weights.iter().enumerate() {
            s += a * acts[c * h * w + i];
        }
        *r = s.max(0.0);
    }

    let up = bilinear_resize(&raw, image.height(), image.width());
    let (heatmap, raw_extent) = normalize(&up);
    Ok(Explanation {
        heatmap,
        target_class,
        method: ExplanationMethod::GradCam,
        raw_extent,
        layer: Some(layer_name),
    })
}
