use axum::extract::{DefaultBodyLimit, Multipart, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use leaflife_core::dataset::PreprocessingMode;
use leaflife_core::model::Backbone;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::predict::{predict_image, PredictError, DEFAULT_ALPHA};
use crate::{AppState, ServiceConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_id: String,
    pub backbone: Backbone,
    pub classes: Vec<String>,
    pub preprocessing_mode: PreprocessingMode,
    pub adversarially_trained: bool,
    pub train_config_digest: String,
}

#[derive(Debug, Deserialize)]
struct PredictQuery {
    #[serde(default)]
    explain: bool,
    alpha: Option<f64>,
}

fn error(status: StatusCode, code: &str) -> Response {
    (status, Json(json!({ "error": code }))).into_response()
}

impl IntoResponse for PredictError {
    fn into_response(self) -> Response {
        match self {
            PredictError::Decode(reason) => {
                log::debug!("rejected upload: {reason}");
                error(StatusCode::BAD_REQUEST, "decode")
            }
            PredictError::InvalidAlpha(_) => error(StatusCode::BAD_REQUEST, "alpha"),
            PredictError::Internal(e) => {
                log::error!("prediction failed: {e}");
                error(StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        }
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn model_info(State(state): State<AppState>) -> Json<ModelInfo> {
    let m = &state.artifact.metadata;
    Json(ModelInfo {
        model_id: state.model_id.clone(),
        backbone: m.backbone,
        classes: m.class_names.clone(),
        preprocessing_mode: m.preprocessing_mode,
        adversarially_trained: state.artifact.is_adversarially_trained(),
        train_config_digest: m.train_config_digest.clone(),
    })
}

async fn predict(
    State(state): State<AppState>,
    Query(query): Query<PredictQuery>,
    mut multipart: Multipart,
) -> Response {
    let mut upload = None;
    loop {
        match multipart.next_field().await {
            Ok(Some(field)) if field.name() == Some("image") => match field.bytes().await {
                Ok(bytes) => {
                    upload = Some(bytes);
                    break;
                }
                Err(e) => return multipart_error(e.status()),
            },
            Ok(Some(_)) => continue,
            Ok(None) => break,
            Err(e) => return multipart_error(e.status()),
        }
    }
    let Some(bytes) = upload else {
        return error(StatusCode::BAD_REQUEST, "missing_image");
    };
    let alpha = query.alpha.unwrap_or(DEFAULT_ALPHA);
    let task = tokio::task::spawn_blocking(move || {
        predict_image(&state.artifact, &state.model_id, &bytes, query.explain, alpha)
    });
    match task.await {
        Ok(Ok(result)) => Json(result).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => {
            log::error!("prediction task failed: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, "internal")
        }
    }
}

fn multipart_error(status: StatusCode) -> Response {
    if status == StatusCode::PAYLOAD_TOO_LARGE {
        error(status, "too_large")
    } else {
        error(StatusCode::BAD_REQUEST, "multipart")
    }
}

fn cors(origins: &[String]) -> Option<CorsLayer> {
    if origins.is_empty() {
        return None;
    }
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    if origins.iter().any(|o| o == "*") {
        return Some(layer.allow_origin(Any));
    }
    let list: Vec<HeaderValue> = origins.iter().filter_map(|o| o.parse().ok()).collect();
    Some(layer.allow_origin(AllowOrigin::list(list)))
}

pub fn router(state: AppState, config: &ServiceConfig) -> Router {
    let app = Router::new()
        .route("/health", get(health))
        .route("/model-info", get(model_info))
        .route("/predict", post(predict))
        .layer(DefaultBodyLimit::max(config.max_upload_bytes))
        .with_state(state);
    match cors(&config.cors_origins) {
        Some(layer) => app.layer(layer),
        None => app,
    }
}
