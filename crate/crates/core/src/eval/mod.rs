//! Confusion matrices, per-class metrics and test-set evaluation.

mod comparison;
mod confusion;
mod evaluate;
mod report;

pub use comparison::{
    comparison_table, load_literature, render_markdown, ComparisonRow, LiteratureRow,
    LITERATURE_CSV,
};
pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use evaluate::{evaluate, EvaluationReport};
pub use report::{classification_report, ClassMetrics, ClassificationReport};
