use crate::autodiff::Tensor;
use crate::features::{EmbeddingBundle, Source};
use crate::graph::{DirectedGraph, EgoSubgraph};
use crate::structure::{bfs_spd_with, EdgeFeatures, PathFeatures, SpdMatrix};

/// One ego subgraph with everything the model reads besides node features.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphBatch {
    /// Global node ids in local order.
    pub nodes: Vec<usize>,
    /// Local index of the node being classified.
    pub center: usize,
    pub spd: SpdMatrix,
    /// Global in/out degrees of each local node (unclipped).
    pub in_deg: Vec<usize>,
    pub out_deg: Vec<usize>,
    /// `k²×(max_spd·d_e)` design matrix: row `i·k+j` holds the path edge
    /// features of pair (i, j) at their path positions, divided by the path
    /// length, so that multiplying by the edge-weight table yields the
    /// averaged edge-encoding term.
    pub edge_design: Tensor,
    pub edge_dim: usize,
}

impl SubgraphBatch {
    /// Builds a batch with synthesized edge features.
    pub fn build(graph: &DirectedGraph, sub: &EgoSubgraph, max_spd: usize) -> Self {
        let edges = EdgeFeatures::synthesize(graph, sub);
        Self::build_with_edges(graph, sub, max_spd, &edges)
    }

    pub fn build_with_edges(
        graph: &DirectedGraph,
        sub: &EgoSubgraph,
        max_spd: usize,
        edges: &EdgeFeatures,
    ) -> Self {
        let adj = sub.undirected_adjacency();
        let spd = bfs_spd_with(&adj, max_spd);
        let paths = PathFeatures::build_with(sub, &adj, &spd, edges);
        let edge_design = edge_design_matrix(&paths, max_spd);
        Self {
            nodes: sub.nodes.clone(),
            center: sub.node_map[&sub.center],
            in_deg: sub.nodes.iter().map(|&v| graph.in_degree(v)).collect(),
            out_deg: sub.nodes.iter().map(|&v| graph.out_degree(v)).collect(),
            spd,
            edge_design,
            edge_dim: edges.dim,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Relabels nodes so that new index `perm[i]` holds old node `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.len();
        assert_eq!(perm.len(), k);
        let mut nodes = vec![0; k];
        let mut in_deg = vec![0; k];
        let mut out_deg = vec![0; k];
        for (old, &new) in perm.iter().enumerate() {
            nodes[new] = self.nodes[old];
            in_deg[new] = self.in_deg[old];
            out_deg[new] = self.out_deg[old];
        }
        let cols = self.edge_design.cols();
        let mut design = vec![0.0; self.edge_design.numel()];
        for i in 0..k {
            for j in 0..k {
                let src = (i * k + j) * cols;
                let dst = (perm[i] * k + perm[j]) * cols;
                design[dst..dst + cols].copy_from_slice(&self.edge_design.data()[src..src + cols]);
            }
        }
        Self {
            nodes,
            center: perm[self.center],
            spd: self.spd.permuted(perm),
            in_deg,
            out_deg,
            edge_design: Tensor::matrix(k * k, cols, design).expect("same shape"),
            edge_dim: self.edge_dim,
        }
    }

    /// Rows of each requested source for this batch's nodes.
    pub fn gather_inputs(
        &self,
        bundle: &EmbeddingBundle,
        sources: &[Source],
    ) -> Vec<(Source, Tensor)> {
        sources
            .iter()
            .map(|&s| (s, bundle.gather(s, &self.nodes)))
            .collect()
    }
}

pub(crate) fn edge_design_matrix(paths: &PathFeatures, max_spd: usize) -> Tensor {
    let k = paths.len();
    let d_e = paths.dim();
    let cols = max_spd * d_e;
    let mut data = vec![0.0; k * k * cols];
    for i in 0..k {
        for j in 0..k {
            let len = paths.path_len(i, j);
            if len == 0 {
                continue;
            }
            let row = &mut data[(i * k + j) * cols..(i * k + j + 1) * cols];
            for n in 0..len {
                for (f, &x) in paths.edge(i, j, n).iter().enumerate() {
                    row[n * d_e + f] = x / len as f64;
                }
            }
        }
    }
    Tensor::matrix(k * k, cols, data).expect("design shape")
}
