use std::collections::BTreeMap;
use std::time::Instant;

use base64::Engine;
use image::ImageFormat;
use leaflife_core::dataset::{decode_image, preprocess_image, resize_rgb};
use leaflife_core::explain::{encode_png, grad_cam, render_overlay, CamScore, Colormap, LayerSelector, TargetClass};
use leaflife_core::model::{argmax, predict_batch, TrainedModelArtifact};
use leaflife_core::Error as CoreError;
use serde::{Deserialize, Serialize};

pub const DEFAULT_ALPHA: f64 = 0.4;

/// Body of a successful `/predict` response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub label: String,
    pub confidence: f64,
    pub probabilities: BTreeMap<String, f64>,
    pub heatmap_png_base64: Option<String>,
    pub model_id: String,
    pub latency_ms: f64,
}

#[derive(Debug)]
pub enum PredictError {
    Decode(String),
    InvalidAlpha(f64),
    Internal(CoreError),
}

impl std::fmt::Display for PredictError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PredictError::Decode(reason) => write!(f, "cannot decode image: {reason}"),
            PredictError::InvalidAlpha(a) => write!(f, "alpha {a} is outside [0, 1]"),
            PredictError::Internal(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for PredictError {}

impl From<CoreError> for PredictError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Decode { reason, .. } => PredictError::Decode(reason),
            other => PredictError::Internal(other),
        }
    }
}

/// `<backbone>[-adv]-<first 12 hex digits of the config digest>`.
pub fn model_id(artifact: &TrainedModelArtifact) -> String {
    let m = &artifact.metadata;
    let digest: String = m.train_config_digest.chars().take(12).collect();
    if artifact.is_adversarially_trained() {
        format!("{}-adv-{digest}", m.backbone)
    } else {
        format!("{}-{digest}", m.backbone)
    }
}

/// Classifies one PNG or JPEG upload; with `explain`, also renders a
/// Grad-CAM overlay for the predicted class at opacity `alpha`.
pub fn predict_image(
    artifact: &TrainedModelArtifact,
    model_id: &str,
    bytes: &[u8],
    explain: bool,
    alpha: f64,
) -> Result<PredictionResult, PredictError> {
    let started = Instant::now();
    if !(0.0..=1.0).contains(&alpha) {
        return Err(PredictError::InvalidAlpha(alpha));
    }
    match image::guess_format(bytes) {
        Ok(ImageFormat::Png | ImageFormat::Jpeg) => {}
        Ok(other) => return Err(PredictError::Decode(format!("{other:?} is not accepted"))),
        Err(_) => return Err(PredictError::Decode("unrecognized image format".into())),
    }
    let decoded = decode_image(bytes, "upload")?;
    let input = preprocess_image(&decoded, artifact.metadata.preprocessing_mode, "upload");
    let probs = predict_batch(artifact, std::slice::from_ref(&input))?;
    let row = probs.row(0);
    let row = row.as_slice().expect("contiguous row");
    let best = argmax(row);
    let names = &artifact.metadata.class_names;

    let heatmap_png_base64 = if explain {
        let expl = grad_cam(
            artifact,
            &input,
            TargetClass::Index(best),
            &LayerSelector::LastConv,
            CamScore::Logit,
        )?;
        let overlay = render_overlay(&expl, &resize_rgb(&decoded), alpha, Colormap::Jet)?;
        Some(base64::engine::general_purpose::STANDARD.encode(encode_png(&overlay)?))
    } else {
        None
    };

    Ok(PredictionResult {
        label: names[best].clone(),
        confidence: row[best] as f64,
        probabilities: names.iter().cloned().zip(row.iter().map(|p| *p as f64)).collect(),
        heatmap_png_base64,
        model_id: model_id.to_string(),
        latency_ms: started.elapsed().as_secs_f64() * 1000.0,
    })
}
