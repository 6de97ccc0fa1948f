use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square count matrix; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    rows: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidMatrix("no classes".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::InvalidMatrix(format!(
                "row of length {} in a {n}-class matrix",
                r.len()
            )));
        }
        Ok(Self { rows })
    }

    pub fn num_classes(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.rows[truth][predicted]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().flatten().sum()
    }

    pub fn diagonal(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.rows[i][i]).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.rows[truth].iter().sum()
    }

    pub fn column_sum(&self, predicted: usize) -> u64 {
        self.rows.iter().map(|r| r[predicted]).sum()
    }
}

pub fn confusion_matrix(
    y_true: &[usize],
    y_pred: &[usize],
    num_classes: usize,
) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            y_true: y_true.len(),
            y_pred: y_pred.len(),
        });
    }
    if num_classes == 0 {
        return Err(Error::InvalidMatrix("no classes".into()));
    }
    let mut rows = vec![vec![0u64; num_classes]; num_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= num_classes {
                return Err(Error::InvalidLabel { label, num_classes });
            }
        }
        rows[t][p] += 1;
    }
    Ok(ConfusionMatrix { rows })
}
