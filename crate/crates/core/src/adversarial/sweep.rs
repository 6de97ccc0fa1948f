use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetManifest, SplitAssignment};
use crate::error::{Error, Result};
use crate::model::{
    build_classifier, train_with, AdversarialMix, TrainConfig, TrainedModelArtifact,
    TrainingHistory,
};

/// Perturbation budgets swept in the reference robustness study.
pub const REFERENCE_EPSILONS: [f64; 7] = [0.0, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversarialConfig {
    /// L-infinity budgets as fractions of the `[0, 1]` pixel range.
    pub epsilons: Vec<f64>,
    /// Share of each training batch replaced by FGSM examples.
    pub adv_fraction: f64,
    pub base_train: TrainConfig,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        Self {
            epsilons: REFERENCE_EPSILONS.to_vec(),
            adv_fraction: 0.5,
            base_train: TrainConfig::default(),
        }
    }
}

impl AdversarialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::InvalidConfig("epsilons: list is empty".into()));
        }
        for &e in &self.epsilons {
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::InvalidEpsilon(e));
            }
        }
        let mut sorted = self.epsilons.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("epsilons: duplicate value".into()));
        }
        if !(0.0..=1.0).contains(&self.adv_fraction) {
            return Err(Error::InvalidConfig(format!(
                "adv_fraction: must lie in [0, 1], got {}",
                self.adv_fraction
            )));
        }
        self.base_train.validate()
    }
}

/// One line of the robustness table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Best epoch under early stopping.
    pub optimal_epochs: usize,
}

impl SweepRow {
    pub fn from_history(epsilon: f64, history: &TrainingHistory) -> Result<Self> {
        let best = history
            .best()
            .ok_or_else(|| Error::Training("history has no best epoch".into()))?;
        Ok(Self {
            epsilon,
            val_loss: best.val_loss,
            val_accuracy: best.val_accuracy,
            optimal_epochs: history.best_epoch,
        })
    }
}

/// Trains a fresh model from `config.base_train` with FGSM examples at
/// `epsilon` mixed into every batch. Validation uses clean images.
pub fn adversarial_train(
    split: &SplitAssignment,
    manifest: &DatasetManifest,
    config: &AdversarialConfig,
    epsilon: f64,
) -> Result<(TrainedModelArtifact, TrainingHistory)> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let network = build_classifier(&config.base_train)?;
    let mix = AdversarialMix {
        epsilon,
        fraction: config.adv_fraction,
    };
    train_with(network, split, manifest, &config.base_train, Some(mix))
}

/// One independent run per epsilon (same seed and split), rows in
/// ascending epsilon order.
pub fn epsilon_sweep(
    split: &SplitAssignment,
    manifest: &DatasetManifest,
    config: &AdversarialConfig,
) -> Result<Vec<SweepRow>> {
    epsilon_sweep_with(split, manifest, config, 1, |_, _, _| Ok(()))
}

/// [`epsilon_sweep`] with up to `jobs` runs in parallel; `on_run` sees each
/// finished model (called from the worker thread).
pub fn epsilon_sweep_with<F>(
    split: &SplitAssignment,
    manifest: &DatasetManifest,
    config: &AdversarialConfig,
    jobs: usize,
    on_run: F,
) -> Result<Vec<SweepRow>>
where
    F: Fn(f64, &TrainedModelArtifact, &TrainingHistory) -> Result<()> + Sync,
{
    config.validate()?;
    let mut epsilons = config.epsilons.clone();
    epsilons.sort_by(f64::total_cmp);

    let run_one = |eps: f64| -> Result<SweepRow> {
        log::info!("sweep: training at epsilon {eps}");
        let (artifact, history) = adversarial_train(split, manifest, config, eps)?;
        on_run(eps, &artifact, &history)?;
        SweepRow::from_history(eps, &history)
    };

    let jobs = jobs.clamp(1, epsilons.len());
    if jobs == 1 {
        return epsilons.into_iter().map(run_one).collect();
    }
    let mut results: Vec<Option<Result<SweepRow>>> = (0..epsilons.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunk = epsilons.len().div_ceil(jobs);
        let handles: Vec<_> = epsilons
            .chunks(chunk)
            .map(|part| scope.spawn(|| part.iter().map(|&e| run_one(e)).collect::<Vec<_>>()))
            .collect();
        let mut slot = 0;
        for handle in handles {
            for row in handle.join().expect("sweep worker panicked") {
                results[slot] = Some(row);
                slot += 1;
            }
        }
    });
    results.into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// CSV with header `epsilon,val_loss,val_accuracy,optimal_epochs`.
pub fn sweep_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["epsilon", "val_loss", "val_accuracy", "optimal_epochs"])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, sweep_to_csv(rows)?)?;
    Ok(())
}
