//! Dataset assembly: the prepared artifact, the raw OGB reader and the
//! synthetic benchmark generator.

mod dataset;
pub mod ogb;
pub mod synthetic;

pub use dataset::{hash_file, Dataset};

use crate::autodiff::Tensor;
use crate::error::Result;
use crate::features::{build_bundle, BundleOptions, LlmCache, NodeDocument};
use crate::graph::DirectedGraph;

/// Builds the graph and embedding bundle for `docs`.
pub fn assemble(
    docs: &[NodeDocument],
    edges: &[(usize, usize)],
    class_names: Vec<String>,
    records: &LlmCache,
    ogb_features: Tensor,
    opts: &BundleOptions,
) -> Result<Dataset> {
    let graph = DirectedGraph::from_edge_list(edges, docs.len())?;
    let stats = graph.ingest_stats();
    if stats.self_loops + stats.duplicates > 0 {
        log::warn!(
            "dropped {} self-loops and {} duplicate edges",
            stats.self_loops,
            stats.duplicates
        );
    }
    let bundle = build_bundle(docs, records, class_names.len(), ogb_features, opts)?;
    Dataset::new(
        graph,
        docs.iter().map(|d| d.label).collect(),
        docs.iter().map(|d| d.year).collect(),
        class_names,
        bundle,
    )
}
