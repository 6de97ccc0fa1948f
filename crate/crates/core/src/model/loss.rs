use candle_core::{Device, Tensor, D};

use crate::error::{Error, Result};

pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Tensor> {
    let mut data = vec![0f32; labels.len() * num_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(Error::InvalidLabel {
                label: l,
                num_classes,
            });
        }
        data[i * num_classes + l] = 1.0;
    }
    Ok(Tensor::from_vec(data, (labels.len(), num_classes), &Device::Cpu)?)
}

/// Per-sample categorical cross-entropy `-sum(y * log softmax(z))`, shape `B`.
pub fn per_sample_cross_entropy(logits: &Tensor, targets: &Tensor) -> Result<Tensor> {
    let log_p = candle_nn::ops::log_softmax(logits, D::Minus1)?;
    Ok((targets * log_p)?.sum(D::Minus1)?.neg()?)
}

/// Mean categorical cross-entropy against one-hot (or soft) targets.
pub fn categorical_cross_entropy(logits: &Tensor, targets: &Tensor) -> Result<Tensor> {
    Ok(per_sample_cross_entropy(logits, targets)?.mean_all()?)
}

/// Cross-entropy for integer labels, optionally weighted per class
/// (weighted mean over the batch).
pub fn weighted_cross_entropy(
    logits: &Tensor,
    labels: &[usize],
    class_weights: Option<&[f32]>,
) -> Result<Tensor> {
    let c = logits.dim(D::Minus1)?;
    let per_sample = per_sample_cross_entropy(logits, &one_hot(labels, c)?)?;
    match class_weights {
        None => Ok(per_sample.mean_all()?),
        Some(w) => {
            let sample_w: Vec<f32> = labels.iter().map(|&l| w[l]).collect();
            let total: f32 = sample_w.iter().sum();
            let sample_w = Tensor::from_vec(sample_w, labels.len(), &Device::Cpu)?;
            Ok(((per_sample * sample_w)?.sum_all()? / total as f64)?)
        }
    }
}
