//! Learning metrics, benchmark metrics and the Wilcoxon signed-rank test.

mod ml;
mod quant;
mod wilcoxon;

pub use ml::{
    classification_metrics, classification_metrics_with, regression_metrics, Averaging,
    ClassificationMetrics, ConfusionCounts, RegressionMetrics,
};
pub use quant::{quantitative_metrics, QuantOptions, QuantReport};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult};
