use rand::Rng;

use super::graphormer::{Dropout, FeedForward, Head};
use super::GraphormerConfig;
use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::features::Source;
use crate::fusion::FusionLayer;

/// Structure-free classifier: fused node features through residual
/// feed-forward blocks and the same head, with no attention over neighbors
/// and no centrality, spatial or edge terms.
#[derive(Debug, Clone)]
pub struct NodeMlp {
    cfg: GraphormerConfig,
    pub(crate) fusion: FusionLayer,
    blocks: Vec<FeedForward>,
    head: Head,
}

impl NodeMlp {
    pub fn new<R: Rng>(
        cfg: &GraphormerConfig,
        params: &mut ParamStore,
        rng: &mut R,
        source_dims: &[(Source, usize)],
        active: &[Source],
    ) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_model;
        let fusion = FusionLayer::new(params, rng, source_dims, d, active)?;
        let blocks = (0..cfg.num_layers)
            .map(|i| FeedForward::new(params, rng, &format!("layers.{i}"), d, cfg.d_ffn))
            .collect();
        let head = Head::new(params, rng, d, cfg.num_classes);
        Ok(Self {
            cfg: cfg.clone(),
            fusion,
            blocks,
            head,
        })
    }

    pub fn config(&self) -> &GraphormerConfig {
        &self.cfg
    }

    pub fn fusion(&self) -> &FusionLayer {
        &self.fusion
    }

    /// `r×C` logits for `r` rows of node features.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        inputs: &[(Source, Tensor)],
        dropout: &mut Dropout<'_>,
    ) -> Result<Var> {
        let vars: Vec<(Source, Var)> = inputs
            .iter()
            .filter(|(s, _)| self.fusion.active().contains(s))
            .map(|(s, t)| (*s, tape.constant(t.clone())))
            .collect();
        let rows: Vec<usize> = vars.iter().map(|(_, v)| tape.value(*v).rows()).collect();
        if rows.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::shape(
                "forward",
                format!("source row counts differ: {rows:?}"),
            ));
        }
        let mut h = self.fusion.forward(tape, params, &vars)?.x;
        let eps = self.cfg.layer_norm_eps;
        for block in &self.blocks {
            h = block.forward(tape, params, h, eps, dropout)?;
        }
        self.head.forward(tape, params, h, eps)
    }
}
