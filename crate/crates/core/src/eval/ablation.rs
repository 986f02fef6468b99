use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, MetricsReport};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::features::Source;
use crate::model::{GraphormerConfig, ModelKind};
use crate::train::{Partition, SamplingConfig, TemporalSplit, TrainConfig, Trainer};

const MODEL_TOKEN: &str = "Graphormer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    /// Configuration names such as `"Graphormer + TA"`: `+`-separated
    /// tokens, each a binding name, a raw source name or `Graphormer`.
    /// Names without `Graphormer` use the structure-free classifier.
    pub configurations: Vec<String>,
    pub bindings: BTreeMap<String, Vec<Source>>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            configurations: [
                "Graphormer + TA",
                "Graphormer + P",
                "Graphormer + E",
                "TA + P + E",
                "Graphormer + TA + P + E",
            ]
            .map(String::from)
            .to_vec(),
            bindings: BTreeMap::from([
                ("TA".to_string(), vec![Source::Text, Source::Ogb]),
                ("P".to_string(), vec![Source::Pred]),
                ("E".to_string(), vec![Source::Expl]),
            ]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblationSpec {
    pub name: String,
    pub kind: ModelKind,
    pub sources: Vec<Source>,
}

impl AblationConfig {
    fn valid_names(&self) -> String {
        let mut names: Vec<String> = vec![MODEL_TOKEN.to_string()];
        names.extend(self.bindings.keys().cloned());
        names.extend(Source::ALL.iter().map(|s| s.name().to_string()));
        names.join(", ")
    }

    pub fn parse(&self, name: &str) -> Result<AblationSpec> {
        let mut kind = ModelKind::NodeMlp;
        let mut sources = Vec::new();
        for token in name.split('+').map(str::trim) {
            if token.eq_ignore_ascii_case(MODEL_TOKEN) {
                kind = ModelKind::Graphormer;
            } else if let Some(bound) = self.bindings.get(token) {
                sources.extend_from_slice(bound);
            } else if let Ok(s) = token.parse::<Source>() {
                sources.push(s);
            } else {
                return Err(Error::Config(format!(
                    "unknown ablation component {token:?} in {name:?}; valid names: {}",
                    self.valid_names()
                )));
            }
        }
        sources.sort();
        sources.dedup();
        if sources.is_empty() {
            return Err(Error::Config(format!(
                "ablation configuration {name:?} selects no embedding source"
            )));
        }
        Ok(AblationSpec {
            name: name.to_string(),
            kind,
            sources,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub model: ModelKind,
    pub sources: Vec<Source>,
    pub best_epoch: usize,
    pub val_accuracy: f64,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub split: Partition,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Aligned-column text rendering.
    pub fn render(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .max()
            .unwrap_or(0)
            .max(13);
        let mut out = format!(
            "{:<width$}  {:>8}  {:>9}  {:>9}  {:>9}\n",
            "configuration", "accuracy", "macro_p", "macro_r", "macro_f1"
        );
        for r in &self.rows {
            let m = &r.metrics;
            writeln!(
                out,
                "{:<width$}  {:>8.4}  {:>9.4}  {:>9.4}  {:>9.4}",
                r.name, m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1
            )
            .unwrap();
        }
        out
    }
}

/// Trains and evaluates each configuration with the same seed and split.
/// Rows are sorted by configuration name.
pub fn run_ablation(
    data: &Dataset,
    split: &TemporalSplit,
    model_cfg: &GraphormerConfig,
    train_cfg: &TrainConfig,
    sampling: SamplingConfig,
    ablation: &AblationConfig,
    eval_on: Partition,
) -> Result<AblationTable> {
    let specs = ablation
        .configurations
        .iter()
        .map(|n| ablation.parse(n))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = specs
        .par_iter()
        .map(|spec| {
            log::info!("ablation: training {:?}", spec.name);
            let mut trainer = Trainer::new(
                data,
                spec.kind,
                model_cfg,
                &spec.sources,
                train_cfg,
                sampling,
            )?;
            let outcome = trainer.train(split)?;
            let nodes = split.get(eval_on);
            let preds = trainer.predict(nodes)?;
            let labels: Vec<usize> = nodes
                .iter()
                .map(|&v| data.label(v).expect("split nodes are labeled"))
                .collect();
            Ok(AblationRow {
                name: spec.name.clone(),
                model: spec.kind,
                sources: spec.sources.clone(),
                best_epoch: outcome.best_epoch,
                val_accuracy: outcome.best_val_accuracy,
                metrics: evaluate(&preds, &labels, data.num_classes())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(AblationTable {
        split: eval_on,
        rows,
    })
}
