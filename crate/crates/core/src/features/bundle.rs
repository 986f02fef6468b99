use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::documents::NodeDocument;
use super::encode::{encode_predictions, encode_text};
use super::llm::LlmCache;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// The four per-node embedding sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Expl,
    Pred,
    Text,
    Ogb,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Expl, Source::Pred, Source::Text, Source::Ogb];

    pub fn name(self) -> &'static str {
        match self {
            Source::Expl => "expl",
            Source::Pred => "pred",
            Source::Text => "text",
            Source::Ogb => "ogb",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Source::ALL
            .into_iter()
            .find(|src| src.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown source {s:?}; expected expl, pred, text or ogb"
                ))
            })
    }
}

/// Per-node embedding matrices, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBundle {
    pub expl: Tensor,
    pub pred: Tensor,
    pub text: Tensor,
    pub ogb: Tensor,
}

impl EmbeddingBundle {
    pub fn num_nodes(&self) -> usize {
        self.text.rows()
    }

    pub fn source(&self, s: Source) -> &Tensor {
        match s {
            Source::Expl => &self.expl,
            Source::Pred => &self.pred,
            Source::Text => &self.text,
            Source::Ogb => &self.ogb,
        }
    }

    pub fn dim(&self, s: Source) -> usize {
        self.source(s).cols()
    }

    /// Rows `nodes` of source `s` as a `k×d` matrix.
    pub fn gather(&self, s: Source, nodes: &[usize]) -> Tensor {
        let m = self.source(s);
        let d = m.cols();
        let mut data = Vec::with_capacity(nodes.len() * d);
        for &n in nodes {
            data.extend_from_slice(m.row(n));
        }
        Tensor::matrix(nodes.len(), d, data).expect("gathered shape")
    }
}

#[derive(Debug, Clone)]
pub struct BundleOptions {
    /// Dimension of the hashed text and explanation encodings.
    pub text_dim: usize,
    /// Number of ranked predictions kept per node.
    pub top_k: usize,
    pub seed: u64,
    /// Precomputed replacements for the hashed encoders.
    pub text_override: Option<Tensor>,
    pub expl_override: Option<Tensor>,
}

impl Default for BundleOptions {
    fn default() -> Self {
        Self {
            text_dim: 256,
            top_k: 5,
            seed: 0,
            text_override: None,
            expl_override: None,
        }
    }
}

fn check_rows(name: &str, m: &Tensor, n: usize) -> Result<()> {
    let (rows, _) = m.dims2("build_bundle")?;
    if rows != n {
        return Err(Error::InvalidInput(format!(
            "{name} has {rows} rows but there are {n} documents"
        )));
    }
    Ok(())
}

fn encode_rows(n: usize, dim: usize, f: impl Fn(usize) -> Option<Vec<f64>> + Sync) -> Tensor {
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| f(i).unwrap_or_else(|| vec![0.0; dim]))
        .collect();
    Tensor::matrix(n, dim, rows.concat()).expect("encoded shape")
}

/// Assembles the four sources. Nodes without an LLM record get zero
/// explanation and prediction rows.
pub fn build_bundle(
    docs: &[NodeDocument],
    records: &LlmCache,
    num_classes: usize,
    ogb_features: Tensor,
    opts: &BundleOptions,
) -> Result<EmbeddingBundle> {
    let n = docs.len();
    check_rows("ogb feature matrix", &ogb_features, n)?;
    if opts.text_dim == 0 || opts.top_k == 0 {
        return Err(Error::Config("text_dim and top_k must be positive".into()));
    }
    if let Some(bad) = records.records.keys().find(|&&id| id >= n) {
        return Err(Error::InvalidInput(format!(
            "LLM record for node {bad} but only {n} documents"
        )));
    }

    let text = match &opts.text_override {
        Some(m) => {
            check_rows("text embedding override", m, n)?;
            m.clone()
        }
        None => encode_rows(n, opts.text_dim, |i| {
            Some(encode_text(&docs[i].full_text(), opts.text_dim, opts.seed))
        }),
    };
    let expl = match &opts.expl_override {
        Some(m) => {
            check_rows("explanation embedding override", m, n)?;
            m.clone()
        }
        None => encode_rows(n, opts.text_dim, |i| {
            records
                .get(i)
                .map(|r| encode_text(&r.explanation, opts.text_dim, opts.seed))
        }),
    };
    let pred = encode_rows(n, num_classes, |i| {
        records
            .get(i)
            .map(|r| encode_predictions(r, num_classes, opts.top_k))
    });

    let bundle = EmbeddingBundle {
        expl,
        pred,
        text,
        ogb: ogb_features,
    };
    for s in Source::ALL {
        if !bundle.source(s).is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite values in {s} embeddings"
            )));
        }
    }
    Ok(bundle)
}
