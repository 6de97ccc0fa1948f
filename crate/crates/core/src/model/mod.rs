//! Transfer-learning classifiers (Xception, InceptionV3) and their training.

mod artifact;
mod backbone;
mod classifier;
mod config;
mod early_stopping;
mod history;
mod inception;
mod layers;
mod loss;
mod network;
mod ops;
mod params;
pub mod toy;
mod train;
mod xception;

pub use artifact::{
    framework_version, AdversarialProvenance, ArtifactMetadata, TrainedModelArtifact,
    METADATA_FILE, WEIGHTS_FILE,
};
pub use classifier::{
    argmax, images_to_tensor, predict_batch, softmax_rows, tensor_to_array2, ImageClassifier,
};
pub use config::{Augmentation, Backbone, EarlyStopMonitor, TrainConfig};
pub use early_stopping::{fit, EarlyStopping, EpochOutcome, EpochRunner};
pub use history::{EpochRecord, TrainingHistory};
pub use layers::Phase;
pub use loss::{categorical_cross_entropy, one_hot, per_sample_cross_entropy, weighted_cross_entropy};
pub use network::{build_classifier, Network};
pub use params::ParamStore;
pub use train::{train, AdversarialMix};
pub(crate) use train::train_with;
pub(crate) use config::hex_digest;
