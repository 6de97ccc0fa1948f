use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    #[serde(rename = "train_acc")]
    pub train_accuracy: f64,
    pub val_loss: f64,
    #[serde(rename = "val_acc")]
    pub val_accuracy: f64,
}

/// Per-epoch metrics of one run. Epochs are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    /// Whether the patience rule ended the run before `max_epochs`.
    pub early_stopped: bool,
}

impl TrainingHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == self.best_epoch)
    }

    pub fn min_val_loss(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.val_loss)
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV with header `epoch,train_loss,train_acc,val_loss,val_acc`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r)?;
        }
        if self.records.is_empty() {
            w.write_record(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    /// Reads the per-epoch records back; the best epoch is recomputed as the
    /// first minimum of validation loss.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<EpochRecord>> {
        let mut reader = csv::Reader::from_path(path)?;
        Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_rows() {
        let h = TrainingHistory {
            records: vec![EpochRecord {
                epoch: 1,
                train_loss: 0.5,
                train_accuracy: 0.75,
                val_loss: 0.25,
                val_accuracy: 1.0,
            }],
            best_epoch: 1,
            stopped_epoch: 1,
            early_stopped: false,
        };
        let csv = h.to_csv().unwrap();
        assert_eq!(
            csv,
            "epoch,train_loss,train_acc,val_loss,val_acc\n1,0.5,0.75,0.25,1.0\n"
        );
        let tmp = tempfile::NamedTempFile::new().unwrap();
        h.save_csv(tmp.path()).unwrap();
        assert_eq!(TrainingHistory::load_csv(tmp.path()).unwrap(), h.records);
    }
}
