//! Classification metrics and the component ablation runner.

mod ablation;
mod metrics;

pub use ablation::{run_ablation, AblationConfig, AblationRow, AblationSpec, AblationTable};
pub use metrics::{confusion, evaluate, metrics, ClassMetrics, ConfusionMatrix, MetricsReport};
