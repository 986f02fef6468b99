//! Node classifiers: the graph transformer and its structure-free variant.

mod batch;
mod config;
mod graphormer;
mod mlp;

pub use batch::SubgraphBatch;
pub use config::GraphormerConfig;
pub use graphormer::{Dropout, ForwardOutput, GraphormerModel};
pub use mlp::NodeMlp;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::Result;
use crate::features::{EmbeddingBundle, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Graphormer,
    NodeMlp,
}

#[derive(Debug, Clone)]
pub enum Classifier {
    Graphormer(GraphormerModel),
    NodeMlp(NodeMlp),
}

impl Classifier {
    /// Registers the parameters of a fresh classifier in `params`.
    pub fn new<R: Rng>(
        kind: ModelKind,
        cfg: &GraphormerConfig,
        params: &mut ParamStore,
        rng: &mut R,
        bundle: &EmbeddingBundle,
        active: &[Source],
    ) -> Result<Self> {
        let dims: Vec<(Source, usize)> = Source::ALL.iter().map(|&s| (s, bundle.dim(s))).collect();
        Ok(match kind {
            ModelKind::Graphormer => {
                Classifier::Graphormer(GraphormerModel::new(cfg, params, rng, &dims, active)?)
            }
            ModelKind::NodeMlp => {
                Classifier::NodeMlp(NodeMlp::new(cfg, params, rng, &dims, active)?)
            }
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::Graphormer(_) => ModelKind::Graphormer,
            Classifier::NodeMlp(_) => ModelKind::NodeMlp,
        }
    }

    pub fn uses_structure(&self) -> bool {
        matches!(self, Classifier::Graphormer(_))
    }

    pub fn active_sources(&self) -> &[Source] {
        match self {
            Classifier::Graphormer(m) => m.fusion().active(),
            Classifier::NodeMlp(m) => m.fusion().active(),
        }
    }

    /// `1×C` logits of the batch's center node.
    pub fn center_logits(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        batch: &SubgraphBatch,
        bundle: &EmbeddingBundle,
        dropout: &mut Dropout<'_>,
    ) -> Result<Var> {
        match self {
            Classifier::Graphormer(m) => {
                let inputs = batch.gather_inputs(bundle, m.fusion().active());
                let out = m.forward(tape, params, batch, &inputs, dropout)?;
                tape.embedding_lookup(out.logits, &[batch.center])
            }
            Classifier::NodeMlp(m) => {
                let center = [batch.nodes[batch.center]];
                let inputs: Vec<_> = m
                    .fusion()
                    .active()
                    .iter()
                    .map(|&s| (s, bundle.gather(s, &center)))
                    .collect();
                m.forward(tape, params, &inputs, dropout)
            }
        }
    }
}
