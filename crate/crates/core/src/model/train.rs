use std::collections::BTreeMap;
use std::path::PathBuf;

use candle_core::{Tensor, D};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::artifact::{AdversarialProvenance, TrainedModelArtifact};
use super::classifier::images_to_tensor;
use super::config::TrainConfig;
use super::early_stopping::{fit, EpochRunner};
use super::history::{EpochRecord, TrainingHistory};
use super::layers::Phase;
use super::loss::{one_hot, per_sample_cross_entropy, weighted_cross_entropy};
use super::network::{Network, HEAD_PREFIX};
use crate::adversarial::{fgsm_perturb, model_to_unit, unit_to_model};
use crate::dataset::{
    load_and_preprocess, DatasetManifest, PreprocessingMode, SplitAssignment, Subset,
};
use crate::error::{Error, Result};

/// FGSM mixing applied to each training batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialMix {
    pub epsilon: f64,
    /// Fraction of each batch (leading rows) replaced by perturbed copies.
    pub fraction: f64,
}

impl AdversarialMix {
    fn adversarial_rows(&self, batch: usize) -> usize {
        if self.epsilon == 0.0 {
            return 0;
        }
        ((self.fraction * batch as f64).round() as usize).min(batch)
    }
}

#[derive(Debug, Clone)]
struct Sample {
    path: PathBuf,
    label: usize,
}

fn samples(split: &SplitAssignment, manifest: &DatasetManifest, subset: Subset) -> Vec<Sample> {
    split
        .subset(manifest, subset)
        .into_iter()
        .map(|(p, l)| Sample {
            path: manifest.absolute_path(p),
            label: *l,
        })
        .collect()
}

fn load_batch(batch: &[&Sample], mode: PreprocessingMode) -> Result<Tensor> {
    let images = batch
        .iter()
        .map(|s| load_and_preprocess(&s.path, mode))
        .collect::<Result<Vec<_>>>()?;
    images_to_tensor(&images)
}

struct NetworkRunner<'a> {
    net: &'a Network,
    config: &'a TrainConfig,
    optimizer: AdamW,
    rng: ChaCha8Rng,
    train: Vec<Sample>,
    val: Vec<Sample>,
    adversarial: Option<AdversarialMix>,
    /// Pooled backbone features for (train, val) when the backbone is frozen
    /// and inputs never change.
    cache: Option<(Tensor, Tensor)>,
}

impl NetworkRunner<'_> {
    fn load(&self, batch: &[&Sample]) -> Result<Tensor> {
        load_batch(batch, self.config.preprocessing_mode)
    }

    fn pooled(&self, samples: &[Sample]) -> Result<Tensor> {
        let mut parts = Vec::new();
        for chunk in samples.chunks(self.config.batch_size) {
            let refs: Vec<&Sample> = chunk.iter().collect();
            let x = self.load(&refs)?;
            parts.push(self.net.pooled_features(&x, Phase::Eval)?.detach());
        }
        Ok(Tensor::cat(&parts, 0)?)
    }

    /// Replaces the leading rows of `x` by FGSM copies computed against the
    /// current weights.
    fn mix_adversarial(&self, x: Tensor, labels: &[usize]) -> Result<Tensor> {
        let Some(mix) = self.adversarial else {
            return Ok(x);
        };
        let k = mix.adversarial_rows(labels.len());
        if k == 0 {
            return Ok(x);
        }
        let mode = self.config.preprocessing_mode;
        let head = model_to_unit(&x.narrow(0, 0, k)?, mode)?;
        let targets = one_hot(&labels[..k], self.config.num_classes)?;
        let adv = unit_to_model(&fgsm_perturb(self.net, &head, &targets, mix.epsilon)?, mode)?;
        if k == labels.len() {
            return Ok(adv);
        }
        Ok(Tensor::cat(&[adv, x.narrow(0, k, labels.len() - k)?], 0)?)
    }

    fn train_logits(&self, batch: &[&Sample], indices: &[u32]) -> Result<Tensor> {
        if let Some((train_feats, _)) = &self.cache {
            let idx = Tensor::new(indices, train_feats.device())?;
            return self.net.head_from_pooled(&train_feats.index_select(&idx, 0)?);
        }
        let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
        let x = self.mix_adversarial(self.load(batch)?, &labels)?;
        if self.config.freeze_backbone {
            let pooled = self.net.pooled_features(&x, Phase::Eval)?.detach();
            self.net.head_from_pooled(&pooled)
        } else {
            self.net.forward(&x, Phase::Train)
        }
    }

    /// Mean loss and accuracy on the validation subset (inference mode).
    fn validate(&self) -> Result<(f64, f64)> {
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (i, chunk) in self.val.chunks(self.config.batch_size).enumerate() {
            let logits = match &self.cache {
                Some((_, val_feats)) => {
                    let start = i * self.config.batch_size;
                    self.net
                        .head_from_pooled(&val_feats.narrow(0, start, chunk.len())?)?
                }
                None => {
                    let refs: Vec<&Sample> = chunk.iter().collect();
                    self.net.forward(&self.load(&refs)?, Phase::Eval)?
                }
            };
            let labels: Vec<usize> = chunk.iter().map(|s| s.label).collect();
            let targets = one_hot(&labels, self.config.num_classes)?;
            let per_sample = per_sample_cross_entropy(&logits, &targets)?;
            loss_sum += per_sample.sum_all()?.to_scalar::<f32>()? as f64;
            correct += count_correct(&logits, &labels)?;
        }
        let n = self.val.len() as f64;
        Ok((loss_sum / n, correct as f64 / n))
    }
}

fn mean_pixel_unit(samples: &[Sample]) -> Result<f32> {
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for s in samples {
        let img = load_and_preprocess(&s.path, PreprocessingMode::ScaleUnit)?;
        sum += img.pixels.iter().map(|v| *v as f64).sum::<f64>();
        count += img.pixels.len();
    }
    Ok((sum / count.max(1) as f64) as f32)
}

fn count_correct(logits: &Tensor, labels: &[usize]) -> Result<usize> {
    let pred = logits.argmax(D::Minus1)?.to_vec1::<u32>()?;
    Ok(pred
        .iter()
        .zip(labels)
        .filter(|(p, l)| **p as usize == **l)
        .count())
}

impl EpochRunner for NetworkRunner<'_> {
    type Snapshot = BTreeMap<String, Tensor>;

    fn run_epoch(&mut self, epoch: usize) -> Result<EpochRecord> {
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &self.train[i]).collect();
            let indices: Vec<u32> = chunk.iter().map(|&i| i as u32).collect();
            let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
            let logits = self.train_logits(&batch, &indices)?;
            let loss =
                weighted_cross_entropy(&logits, &labels, self.config.class_weights.as_deref())?;
            let grads = loss.backward()?;
            self.optimizer.step(&grads)?;
            loss_sum += loss.to_scalar::<f32>()? as f64 * chunk.len() as f64;
            correct += count_correct(&logits, &labels)?;
        }
        let n = self.train.len() as f64;
        let (val_loss, val_accuracy) = self.validate()?;
        Ok(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss,
            val_accuracy,
        })
    }

    fn snapshot(&self) -> Result<Self::Snapshot> {
        self.net.params().snapshot()
    }

    fn restore(&mut self, snapshot: &Self::Snapshot) -> Result<()> {
        self.net.params().restore(snapshot)
    }
}

/// Fine-tunes `network` on the TRAIN subset with Adam and categorical
/// cross-entropy, early-stopping on VAL loss and restoring the best epoch.
pub fn train(
    network: Network,
    split: &SplitAssignment,
    manifest: &DatasetManifest,
    config: &TrainConfig,
) -> Result<(TrainedModelArtifact, TrainingHistory)> {
    train_with(network, split, manifest, config, None)
}

pub(crate) fn train_with(
    mut network: Network,
    split: &SplitAssignment,
    manifest: &DatasetManifest,
    config: &TrainConfig,
    adversarial: Option<AdversarialMix>,
) -> Result<(TrainedModelArtifact, TrainingHistory)> {
    config.validate()?;
    let built = network.config();
    if built.backbone != config.backbone
        || built.num_classes != config.num_classes
        || built.width_multiplier != config.width_multiplier
        || built.preprocessing_mode != config.preprocessing_mode
    {
        return Err(Error::InvalidConfig(
            "network was built from a different architecture config".into(),
        ));
    }
    if manifest.num_classes() != config.num_classes {
        return Err(Error::InvalidConfig(format!(
            "num_classes: config has {}, dataset has {}",
            config.num_classes,
            manifest.num_classes()
        )));
    }
    split.check_consistent(manifest)?;
    let train_set = samples(split, manifest, Subset::Train);
    let val_set = samples(split, manifest, Subset::Val);
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidSplit(format!(
            "need non-empty train and val subsets (got {} / {})",
            train_set.len(),
            val_set.len()
        )));
    }
    network.set_class_names(manifest.classes.clone())?;
    let train_mean_source = train_set.clone();

    let prefix = if config.freeze_backbone { HEAD_PREFIX } else { "" };
    let optimizer = AdamW::new(
        network.params().trainable(prefix),
        ParamsAdamW {
            lr: config.learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
            weight_decay: 0.0,
        },
    )?;

    if config.pretrained_weights.is_none() {
        let take = train_set.len().min(config.batch_size.max(2));
        let refs: Vec<&Sample> = train_set.iter().take(take).collect();
        let x = load_batch(&refs, config.preprocessing_mode)?;
        network.calibrate_batch_norm(&x)?;
    }

    let history = {
        let mut runner = NetworkRunner {
            net: &network,
            config,
            optimizer,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            train: train_set,
            val: val_set,
            adversarial,
            cache: None,
        };
        let uses_inputs = adversarial.is_some_and(|m| m.adversarial_rows(config.batch_size) > 0);
        if config.freeze_backbone && !uses_inputs {
            let train_feats = runner.pooled(&runner.train)?;
            let val_feats = runner.pooled(&runner.val)?;
            runner.cache = Some((train_feats, val_feats));
        }
        fit(&mut runner, config.max_epochs, config.early_stop_patience)?
    };

    let provenance = adversarial.map(|m| AdversarialProvenance {
        epsilon: m.epsilon,
        adv_fraction: m.fraction,
    });
    let mut artifact = TrainedModelArtifact::new(network, provenance);
    artifact.metadata.mean_pixel_unit = Some(mean_pixel_unit(&train_mean_source)?);
    Ok((artifact, history))
}
