//! Grape-leaf disease classification: dataset preparation, transfer-learned
//! CNN classifiers, FGSM adversarial training, saliency maps and evaluation.

pub mod adversarial;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod explain;
pub mod model;

pub use error::{Error, Result};
