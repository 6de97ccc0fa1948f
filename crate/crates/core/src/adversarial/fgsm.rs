use candle_core::{DType, Tensor, Var};

use crate::dataset::PreprocessingMode;
use crate::error::{Error, Result};
use crate::model::{categorical_cross_entropy, ImageClassifier};

/// Maps a `[0, 1]` batch into the model's input space.
pub fn unit_to_model(x: &Tensor, mode: PreprocessingMode) -> Result<Tensor> {
    Ok(match mode {
        PreprocessingMode::ScaleSymmetric => x.affine(2.0, -1.0)?,
        PreprocessingMode::ScaleUnit => x.clone(),
    })
}

pub fn model_to_unit(x: &Tensor, mode: PreprocessingMode) -> Result<Tensor> {
    Ok(match mode {
        PreprocessingMode::ScaleSymmetric => x.affine(0.5, 0.5)?,
        PreprocessingMode::ScaleUnit => x.clone(),
    })
}

/// Gradient of the mean cross-entropy with respect to a `[0, 1]` input batch.
pub fn loss_input_gradient<M: ImageClassifier + ?Sized>(
    model: &M,
    images: &Tensor,
    labels: &Tensor,
) -> Result<Tensor> {
    let x = Var::from_tensor(&images.detach())?;
    let logits = model.logits(&unit_to_model(x.as_tensor(), model.preprocessing_mode())?)?;
    let grads = categorical_cross_entropy(&logits, labels)?.backward()?;
    match grads.get(x.as_tensor()) {
        Some(g) => Ok(g.clone()),
        None => Ok(x.as_tensor().zeros_like()?),
    }
}

/// Elementwise sign in `{-1, 0, 1}`.
pub fn sign(x: &Tensor) -> Result<Tensor> {
    let pos = x.gt(0f32)?.to_dtype(DType::F32)?;
    let neg = x.lt(0f32)?.to_dtype(DType::F32)?;
    Ok((pos - neg)?)
}

/// Fast gradient sign perturbation `clip(x + eps * sign(grad_x L), 0, 1)`.
///
/// `images` are `[0, 1]` NCHW; `labels` are one-hot `B x C`. The model's
/// preprocessing is applied inside, so `epsilon` is a fraction of the pixel
/// dynamic range. `epsilon == 0` returns the input unchanged.
pub fn fgsm_perturb<M: ImageClassifier + ?Sized>(
    model: &M,
    images: &Tensor,
    labels: &Tensor,
    epsilon: f64,
) -> Result<Tensor> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if epsilon == 0.0 {
        return Ok(images.clone());
    }
    let grad = loss_input_gradient(model, images, labels)?;
    let step = (sign(&grad)? * epsilon)?;
    Ok((images.detach() + step)?.clamp(0f32, 1f32)?)
}
