//! HTTP inference API over a saved classifier.
//!
//! Endpoints: `GET /health`, `GET /model-info`, and `POST /predict` taking a
//! multipart `image` field plus `explain` and `alpha` query parameters.

mod api;
mod config;
mod predict;

use std::future::Future;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use leaflife_core::model::TrainedModelArtifact;
use tokio::net::TcpListener;

pub use api::{router, ModelInfo};
pub use config::ServiceConfig;
pub use predict::{model_id, predict_image, PredictError, PredictionResult, DEFAULT_ALPHA};

/// Published schema of `/predict` responses.
pub const PREDICTION_SCHEMA: &str = include_str!("../schema/prediction_result.schema.json");

/// Immutable state shared by all requests.
#[derive(Debug, Clone)]
pub struct AppState {
    pub artifact: Arc<TrainedModelArtifact>,
    pub model_id: String,
}

impl AppState {
    pub fn new(artifact: TrainedModelArtifact) -> Self {
        let model_id = model_id(&artifact);
        Self {
            artifact: Arc::new(artifact),
            model_id,
        }
    }

    pub fn load(model_dir: &Path) -> anyhow::Result<Self> {
        let artifact = TrainedModelArtifact::load(model_dir)
            .with_context(|| format!("cannot load model artifact {}", model_dir.display()))?;
        Ok(Self::new(artifact))
    }
}

/// A bound listener, ready to serve.
pub struct Server {
    listener: TcpListener,
    app: axum::Router,
}

impl Server {
    pub async fn bind(config: &ServiceConfig, state: AppState) -> anyhow::Result<Self> {
        let addr = SocketAddr::new(config.bind, config.port);
        let listener = TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        Ok(Self {
            listener,
            app: router(state, config),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub async fn run_until(self, shutdown: impl Future<Output = ()> + Send + 'static) -> anyhow::Result<()> {
        axum::serve(self.listener, self.app)
            .with_graceful_shutdown(shutdown)
            .await
            .context("server error")
    }
}

/// Loads the artifact, binds, and serves until Ctrl-C.
pub async fn run(config: ServiceConfig) -> anyhow::Result<()> {
    let state = AppState::load(&config.model_dir)?;
    log::info!(
        "loaded {} ({} classes) from {}",
        state.model_id,
        state.artifact.metadata.class_names.len(),
        config.model_dir.display()
    );
    let server = Server::bind(&config, state).await?;
    log::info!("listening on http://{}", server.local_addr());
    server
        .run_until(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
