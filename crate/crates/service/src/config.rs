use std::net::{IpAddr, Ipv4Addr};
use std::path::PathBuf;

use anyhow::{bail, Context};

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub model_dir: PathBuf,
    pub bind: IpAddr,
    pub port: u16,
    pub max_upload_bytes: usize,
    /// Origins allowed to call cross-origin; `*` allows any.
    pub cors_origins: Vec<String>,
}

impl ServiceConfig {
    pub fn new(model_dir: impl Into<PathBuf>) -> Self {
        Self {
            model_dir: model_dir.into(),
            bind: IpAddr::V4(Ipv4Addr::UNSPECIFIED),
            port: 8080,
            max_upload_bytes: 10 * 1024 * 1024,
            cors_origins: Vec::new(),
        }
    }

    /// Reads `LEAFLIFE_MODEL_DIR`, `LEAFLIFE_PORT`, `LEAFLIFE_MAX_UPLOAD_MB`
    /// and `LEAFLIFE_CORS_ORIGINS` (comma separated).
    pub fn from_env() -> anyhow::Result<Self> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> anyhow::Result<Self> {
        let Some(dir) = get("LEAFLIFE_MODEL_DIR") else {
            bail!("LEAFLIFE_MODEL_DIR is not set");
        };
        let mut config = Self::new(dir);
        if let Some(port) = get("LEAFLIFE_PORT") {
            config.port = port
                .parse()
                .with_context(|| format!("LEAFLIFE_PORT: not a port number: {port:?}"))?;
        }
        if let Some(mb) = get("LEAFLIFE_MAX_UPLOAD_MB") {
            let mb: f64 = mb
                .parse()
                .with_context(|| format!("LEAFLIFE_MAX_UPLOAD_MB: not a number: {mb:?}"))?;
            if !(mb.is_finite() && mb > 0.0) {
                bail!("LEAFLIFE_MAX_UPLOAD_MB: must be positive");
            }
            config.max_upload_bytes = (mb * 1024.0 * 1024.0) as usize;
        }
        if let Some(origins) = get("LEAFLIFE_CORS_ORIGINS") {
            config.cors_origins = origins
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
        }
        Ok(config)
    }
}
