use leaflife_core::model::{fit, EpochRecord, EpochRunner};
use leaflife_core::Error;
use proptest::prelude::*;

/// Holds the number of the epoch whose "weights" are current.
struct Scripted {
    losses: Vec<f64>,
    weights: usize,
    restored: Option<usize>,
}

impl EpochRunner for Scripted {
    type Snapshot = usize;

    fn run_epoch(&mut self, epoch: usize) -> leaflife_core::Result<EpochRecord> {
        self.weights = epoch;
        Ok(EpochRecord {
            epoch,
            train_loss: 0.0,
            train_accuracy: 0.0,
            val_loss: self.losses[epoch - 1],
            val_accuracy: 0.0,
        })
    }

    fn snapshot(&self) -> leaflife_core::Result<usize> {
        Ok(self.weights)
    }

    fn restore(&mut self, s: &usize) -> leaflife_core::Result<()> {
        self.weights = *s;
        self.restored = Some(*s);
        Ok(())
    }
}

fn scripted(losses: &[f64]) -> Scripted {
    Scripted {
        losses: losses.to_vec(),
        weights: 0,
        restored: None,
    }
}

/// Expected (best_epoch, stopped_epoch) by direct simulation of the rule.
fn oracle(losses: &[f64], max_epochs: usize, patience: usize) -> (usize, usize) {
    let limit = patience.max(1);
    let (mut best, mut best_loss, mut since) = (0, f64::INFINITY, 0);
    for epoch in 1..=max_epochs {
        let l = losses[epoch - 1];
        if l < best_loss {
            best = epoch;
            best_loss = l;
            since = 0;
        } else {
            since += 1;
            if since == limit {
                return (best, epoch);
            }
        }
    }
    (best, max_epochs)
}

#[test]
fn increasing_losses_with_zero_patience() {
    let mut r = scripted(&[0.5, 0.6, 0.7, 0.8]);
    let h = fit(&mut r, 4, 0).unwrap();
    assert_eq!((h.best_epoch, h.stopped_epoch, h.early_stopped), (1, 2, true));
    assert_eq!(r.weights, 1);
}

#[test]
fn patience_five() {
    let losses = [1.0, 0.8, 0.7, 0.75, 0.72, 0.71, 0.9, 0.8, 0.6];
    let mut r = scripted(&losses);
    let h = fit(&mut r, 9, 5).unwrap();
    assert_eq!((h.best_epoch, h.stopped_epoch), (3, 8));
    assert_eq!(r.restored, Some(3));
    assert_eq!(h.records.len(), 8);
}

#[test]
fn runs_to_the_cap_when_always_improving() {
    let mut r = scripted(&[5.0, 4.0, 3.0]);
    let h = fit(&mut r, 3, 1).unwrap();
    assert_eq!((h.best_epoch, h.stopped_epoch, h.early_stopped), (3, 3, false));
}

#[test]
fn never_finite_is_an_error() {
    let mut r = scripted(&[f64::NAN, f64::NAN]);
    assert!(matches!(fit(&mut r, 2, 3), Err(Error::Training(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stop_epoch_and_restoration(
        losses in prop::collection::vec(0u8..20, 1..40),
        patience in 0usize..8,
    ) {
        let losses: Vec<f64> = losses.iter().map(|v| *v as f64 / 10.0).collect();
        let max_epochs = losses.len();
        let mut r = scripted(&losses);
        let h = fit(&mut r, max_epochs, patience).unwrap();
        let (best, stopped) = oracle(&losses, max_epochs, patience);
        prop_assert_eq!(h.best_epoch, best);
        prop_assert_eq!(h.stopped_epoch, stopped);
        prop_assert_eq!(r.weights, best);
        prop_assert!(h.best_epoch <= h.stopped_epoch);
        prop_assert!(h.stopped_epoch - h.best_epoch <= patience.max(1));
        prop_assert_eq!(h.min_val_loss(), losses[best - 1]);
        let min = losses[..stopped].iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(h.best().unwrap().val_loss, min);
    }
}
