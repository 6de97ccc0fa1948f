use super::history::{EpochRecord, TrainingHistory};
use crate::error::{Error, Result};

/// Patience rule on validation loss.
///
/// An epoch improves when its loss is strictly below the best so far. The
/// run stops after `max(patience, 1)` consecutive epochs without
/// improvement, so `stopped - best == max(patience, 1)` whenever it fires.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best_loss: f64,
    best_epoch: usize,
    wait: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochOutcome {
    Improved,
    NoImprovement,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            wait: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> EpochOutcome {
        if val_loss < self.best_loss {
            self.best_loss = val_loss;
            self.best_epoch = epoch;
            self.wait = 0;
            return EpochOutcome::Improved;
        }
        self.wait += 1;
        if self.wait >= self.patience.max(1) {
            EpochOutcome::Stop
        } else {
            EpochOutcome::NoImprovement
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }
}

/// One trainable thing driven by [`fit`].
pub trait EpochRunner {
    type Snapshot;

    /// Trains for one epoch (numbered from 1) and evaluates on validation data.
    fn run_epoch(&mut self, epoch: usize) -> Result<EpochRecord>;

    fn snapshot(&self) -> Result<Self::Snapshot>;

    fn restore(&mut self, snapshot: &Self::Snapshot) -> Result<()>;
}

/// Runs epochs until `max_epochs` or early stopping, then restores the
/// weights of the best epoch.
pub fn fit<R: EpochRunner>(
    runner: &mut R,
    max_epochs: usize,
    patience: usize,
) -> Result<TrainingHistory> {
    let mut stopper = EarlyStopping::new(patience);
    let mut records = Vec::new();
    let mut best = None;
    let mut early_stopped = false;
    let mut stopped_epoch = 0;
    for epoch in 1..=max_epochs {
        let record = runner.run_epoch(epoch)?;
        log::info!(
            "epoch {epoch}: loss {:.4} acc {:.4} | val_loss {:.4} val_acc {:.4}",
            record.train_loss,
            record.train_accuracy,
            record.val_loss,
            record.val_accuracy
        );
        records.push(record);
        stopped_epoch = epoch;
        match stopper.observe(epoch, record.val_loss) {
            EpochOutcome::Improved => best = Some(runner.snapshot()?),
            EpochOutcome::NoImprovement => {}
            EpochOutcome::Stop => {
                early_stopped = epoch < max_epochs;
                break;
            }
        }
    }
    let best = best.ok_or_else(|| {
        Error::Training("validation loss was never finite; nothing to restore".into())
    })?;
    runner.restore(&best)?;
    Ok(TrainingHistory {
        records,
        best_epoch: stopper.best_epoch(),
        stopped_epoch,
        early_stopped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// "Weights" are just the epoch whose state the runner currently holds.
    struct Scripted {
        losses: Vec<f64>,
        weights: usize,
    }

    impl EpochRunner for Scripted {
        type Snapshot = usize;

        fn run_epoch(&mut self, epoch: usize) -> Result<EpochRecord> {
            self.weights = epoch;
            Ok(EpochRecord {
                epoch,
                train_loss: 0.0,
                train_accuracy: 0.0,
                val_loss: self.losses[epoch - 1],
                val_accuracy: 0.0,
            })
        }

        fn snapshot(&self) -> Result<usize> {
            Ok(self.weights)
        }

        fn restore(&mut self, s: &usize) -> Result<()> {
            self.weights = *s;
            Ok(())
        }
    }

    fn run(losses: &[f64], max_epochs: usize, patience: usize) -> (TrainingHistory, usize) {
        let mut r = Scripted {
            losses: losses.to_vec(),
            weights: 0,
        };
        let h = fit(&mut r, max_epochs, patience).unwrap();
        (h, r.weights)
    }

    #[test]
    fn patience_zero_strictly_increasing() {
        let (h, w) = run(&[1.0, 2.0, 3.0, 4.0], 4, 0);
        assert_eq!(h.stopped_epoch, 2);
        assert_eq!(h.best_epoch, 1);
        assert_eq!(w, 1);
        assert!(h.early_stopped);
    }

    #[test]
    fn patience_five() {
        let losses = [0.9, 0.7, 0.5, 0.6, 0.55, 0.52, 0.51, 0.58, 0.4];
        let (h, w) = run(&losses, 20, 5);
        assert_eq!(h.best_epoch, 3);
        assert_eq!(h.stopped_epoch, 8);
        assert_eq!(w, 3);
    }

    #[test]
    fn improvement_resets_wait() {
        let losses = [1.0, 1.1, 1.2, 0.9, 1.0, 1.0, 1.0];
        let (h, _) = run(&losses, 7, 3);
        assert_eq!(h.best_epoch, 4);
        assert_eq!(h.stopped_epoch, 7);
        // stopping on the final epoch is not an early stop
        assert!(!h.early_stopped);
    }

    #[test]
    fn equal_loss_is_not_improvement() {
        let (h, _) = run(&[1.0, 1.0, 1.0], 3, 1);
        assert_eq!(h.best_epoch, 1);
        assert_eq!(h.stopped_epoch, 2);
    }

    #[test]
    fn all_nan_is_an_error() {
        let mut r = Scripted {
            losses: vec![f64::NAN; 3],
            weights: 0,
        };
        assert!(fit(&mut r, 3, 5).is_err());
    }
}
