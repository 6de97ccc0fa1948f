use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::{classification_report, confusion_matrix, ClassMetrics, ConfusionMatrix};
use crate::dataset::{load_and_preprocess, DatasetManifest, SplitAssignment, Subset};
use crate::error::{Error, Result};
use crate::explain::Colormap;
use crate::model::{argmax, predict_batch, ImageClassifier};

/// Test-set results for one model. Confusion rows are true classes, columns
/// predicted classes, both in `class_names` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_id: String,
    pub class_names: Vec<String>,
    pub num_samples: u64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

impl EvaluationReport {
    pub fn from_predictions(
        model_id: impl Into<String>,
        class_names: &[String],
        y_true: &[usize],
        y_pred: &[usize],
    ) -> Result<Self> {
        let confusion = confusion_matrix(y_true, y_pred, class_names.len())?;
        let r = classification_report(&confusion, class_names)?;
        Ok(Self {
            model_id: model_id.into(),
            class_names: class_names.to_vec(),
            num_samples: confusion.total(),
            accuracy: r.accuracy,
            confusion,
            per_class: r.per_class,
            macro_precision: r.macro_precision,
            macro_recall: r.macro_recall,
            macro_f1: r.macro_f1,
            weighted_f1: r.weighted_f1,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
            _ => e.into(),
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Confusion matrix as CSV with a header of predicted class names.
    pub fn confusion_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(self.class_names.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.class_names.iter().zip(self.confusion.rows()) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
    }

    /// Heat grid of the row-normalized confusion matrix, `cell` pixels per entry.
    pub fn confusion_image(&self, cell: u32) -> RgbImage {
        let n = self.confusion.num_classes() as u32;
        let side = n * cell + n + 1;
        let mut img = RgbImage::from_pixel(side, side, Rgb([96, 96, 96]));
        for i in 0..n as usize {
            let support = self.confusion.row_sum(i).max(1) as f32;
            for j in 0..n as usize {
                let color = Colormap::Jet.map(self.confusion.get(i, j) as f32 / support);
                let (x0, y0) = (1 + j as u32 * (cell + 1), 1 + i as u32 * (cell + 1));
                for y in y0..y0 + cell {
                    for x in x0..x0 + cell {
                        img.put_pixel(x, y, Rgb(color));
                    }
                }
            }
        }
        img
    }

    /// Writes `report.json`, `confusion.csv` and `confusion.png` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json()?)?;
        fs::write(dir.join("confusion.csv"), self.confusion_csv()?)?;
        self.confusion_image(48).save(dir.join("confusion.png"))?;
        Ok(())
    }
}

/// Runs `model` over the test subset in manifest order.
pub fn evaluate<M: ImageClassifier + ?Sized>(
    model: &M,
    split: &SplitAssignment,
    manifest: &DatasetManifest,
    model_id: &str,
    batch_size: usize,
) -> Result<EvaluationReport> {
    if model.class_names() != manifest.classes.as_slice() {
        return Err(Error::ClassOrderMismatch {
            model: model.class_names().to_vec(),
            dataset: manifest.classes.clone(),
        });
    }
    split.check_consistent(manifest)?;
    let test = split.subset(manifest, Subset::Test);
    if test.is_empty() {
        return Err(Error::InvalidSplit("test subset is empty".into()));
    }
    let mode = model.preprocessing_mode();
    let mut y_true = Vec::with_capacity(test.len());
    let mut y_pred = Vec::with_capacity(test.len());
    for chunk in test.chunks(batch_size.max(1)) {
        let images = chunk
            .iter()
            .map(|(p, _)| load_and_preprocess(manifest.absolute_path(p), mode))
            .collect::<Result<Vec<_>>>()?;
        let probs = predict_batch(model, &images)?;
        for (row, (_, label)) in probs.rows().into_iter().zip(chunk) {
            y_true.push(*label);
            y_pred.push(argmax(row.as_slice().expect("contiguous row")));
        }
    }
    EvaluationReport::from_predictions(model_id, model.class_names(), &y_true, &y_pred)
}
