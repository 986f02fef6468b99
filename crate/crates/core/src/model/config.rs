use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Graph-transformer hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphormerConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub d_model: usize,
    pub d_ffn: usize,
    /// Largest shortest-path distance with its own bias bucket.
    pub max_spd: usize,
    /// Degrees at or above this value share the last centrality row.
    pub max_degree_bucket: usize,
    pub edge_feature_dim: usize,
    /// Filled from the dataset when zero.
    pub num_classes: usize,
    pub dropout: f64,
    pub layer_norm_eps: f64,
}

impl Default for GraphormerConfig {
    fn default() -> Self {
        Self {
            num_layers: 4,
            num_heads: 4,
            d_model: 128,
            d_ffn: 256,
            max_spd: 5,
            max_degree_bucket: 64,
            edge_feature_dim: crate::structure::SYNTHETIC_EDGE_DIM,
            num_classes: 0,
            dropout: 0.0,
            layer_norm_eps: 1e-5,
        }
    }
}

impl GraphormerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_heads == 0 || self.d_model == 0 || !self.d_model.is_multiple_of(self.num_heads)
        {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of num_heads {}",
                self.d_model, self.num_heads
            )));
        }
        if self.max_spd == 0 {
            return Err(Error::Config("max_spd must be at least 1".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "num_classes must be at least 2, got {}",
                self.num_classes
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.d_ffn == 0 || self.edge_feature_dim == 0 {
            return Err(Error::Config(
                "d_ffn and edge_feature_dim must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.num_heads
    }

    /// Bias-table bucket for a capped distance: `0..=max_spd` map to
    /// themselves and anything larger (the unreachable sentinel) to
    /// `max_spd + 1`.
    pub fn spd_bucket(&self, d: usize) -> usize {
        d.min(self.max_spd + 1)
    }

    pub fn degree_bucket(&self, deg: usize) -> usize {
        deg.min(self.max_degree_bucket)
    }
}
