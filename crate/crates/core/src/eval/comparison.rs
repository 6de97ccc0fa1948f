use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvaluationReport;
use crate::error::{Error, Result};

/// Previously published results, bundled for the comparison table.
pub const LITERATURE_CSV: &str = include_str!("../../assets/literature.csv");

/// A published accuracy figure. `accuracy_percent` is kept as written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteratureRow {
    pub author: String,
    pub method: String,
    pub accuracy_percent: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonRow {
    pub author: String,
    pub method: String,
    pub accuracy_percent: String,
    pub computed: bool,
}

/// Parses `author,method,accuracy_percent` rows; `None` reads the bundled file.
pub fn load_literature(path: Option<&Path>) -> Result<Vec<LiteratureRow>> {
    let mut reader = match path {
        Some(p) => {
            let file = std::fs::File::open(p).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::NotFound(p.to_path_buf()),
                _ => e.into(),
            })?;
            csv::Reader::from_reader(Box::new(file) as Box<dyn std::io::Read>)
        }
        None => csv::Reader::from_reader(Box::new(LITERATURE_CSV.as_bytes()) as Box<dyn std::io::Read>),
    };
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Literature rows verbatim, then one row per report in the given order.
pub fn comparison_table(reports: &[EvaluationReport], literature: &[LiteratureRow]) -> Vec<ComparisonRow> {
    let static_rows = literature.iter().map(|r| ComparisonRow {
        author: r.author.clone(),
        method: r.method.clone(),
        accuracy_percent: r.accuracy_percent.clone(),
        computed: false,
    });
    let computed = reports.iter().map(|r| ComparisonRow {
        author: "This work".into(),
        method: r.model_id.clone(),
        accuracy_percent: format!("{:.2}", r.accuracy * 100.0),
        computed: true,
    });
    static_rows.chain(computed).collect()
}

pub fn render_markdown(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("| Author | Method | Accuracy (%) |\n|---|---|---|\n");
    for r in rows {
        out.push_str(&format!("| {} | {} | {} |\n", r.author, r.method, r.accuracy_percent));
    }
    out
}
