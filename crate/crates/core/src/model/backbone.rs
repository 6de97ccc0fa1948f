use std::fmt::Debug;

use candle_core::Tensor;

use super::layers::Phase;
use crate::error::Result;

/// One named block of a backbone; Grad-CAM can target any stage output.
pub(crate) trait Stage: Debug + Send + Sync {
    fn forward(&self, x: &Tensor, phase: Phase) -> Result<Tensor>;
}

/// Stages in forward order, each with its layer name.
pub(crate) type Stages = Vec<(String, Box<dyn Stage>)>;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Widths(pub f64);

impl Widths {
    pub fn scale(self, channels: usize) -> usize {
        ((channels as f64 * self.0).round() as usize).max(1)
    }
}
