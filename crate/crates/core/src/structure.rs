//! Pairwise and per-node structure consumed by the attention biases:
//! shortest-path distances, the edge features along one shortest path per
//! pair, degrees and clustering coefficients.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::graph::{DirectedGraph, EgoSubgraph};

/// Hop distances on the undirected view of a subgraph, capped at `cap`.
/// Pairs farther apart than `cap` (or disconnected) hold `cap + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpdMatrix {
    k: usize,
    cap: usize,
    dist: Vec<usize>,
}

impl SpdMatrix {
    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn unreachable(&self) -> usize {
        self.cap + 1
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.dist[i * self.k + j]
    }

    pub fn is_reachable(&self, i: usize, j: usize) -> bool {
        self.get(i, j) <= self.cap
    }

    /// Row-major `k * k` distances.
    pub fn as_slice(&self) -> &[usize] {
        &self.dist
    }

    /// Reorders rows and columns so that new index `perm[i]` holds old `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.k;
        let mut dist = vec![0; k * k];
        for i in 0..k {
            for j in 0..k {
                dist[perm[i] * k + perm[j]] = self.dist[i * k + j];
            }
        }
        Self {
            k,
            cap: self.cap,
            dist,
        }
    }
}

/// All-pairs BFS distances over the undirected view of `sub`.
pub fn bfs_spd(sub: &EgoSubgraph, cap: usize) -> SpdMatrix {
    assert!(cap >= 1, "distance cap must be at least 1");
    let adj = sub.undirected_adjacency();
    bfs_spd_with(&adj, cap)
}

pub(crate) fn bfs_spd_with(adj: &[Vec<(usize, usize)>], cap: usize) -> SpdMatrix {
    let k = adj.len();
    let unreachable = cap + 1;
    let mut dist = vec![unreachable; k * k];
    let mut queue = VecDeque::with_capacity(k);
    for src in 0..k {
        let row = &mut dist[src * k..(src + 1) * k];
        row[src] = 0;
        queue.clear();
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = row[u];
            if du == cap {
                continue;
            }
            for &(v, _) in &adj[u] {
                if row[v] == unreachable {
                    row[v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    SpdMatrix { k, cap, dist }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no path within the distance cap")]
pub struct Unreachable;

/// Edge indices (into `sub.local_edges`) along one shortest path from `i` to
/// `j`. Ties are broken toward the smallest local node index, then the
/// smallest edge index. `i == j` yields an empty path.
pub fn shortest_path_edges(
    sub: &EgoSubgraph,
    i: usize,
    j: usize,
    spd: &SpdMatrix,
) -> Result<Vec<usize>, Unreachable> {
    let adj = sub.undirected_adjacency();
    path_with(&adj, i, j, spd)
}

fn path_with(
    adj: &[Vec<(usize, usize)>],
    i: usize,
    j: usize,
    spd: &SpdMatrix,
) -> Result<Vec<usize>, Unreachable> {
    if i == j {
        return Ok(Vec::new());
    }
    if !spd.is_reachable(i, j) {
        return Err(Unreachable);
    }
    let mut path = Vec::with_capacity(spd.get(i, j));
    let mut cur = j;
    while cur != i {
        let want = spd.get(i, cur) - 1;
        let &(prev, edge) = adj[cur]
            .iter()
            .find(|&&(u, _)| spd.get(i, u) == want)
            .expect("BFS distances admit a predecessor");
        path.push(edge);
        cur = prev;
    }
    path.reverse();
    Ok(path)
}

/// Per-edge features for both traversal directions.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFeatures {
    pub dim: usize,
    pub forward: Vec<Vec<f64>>,
    pub backward: Vec<Vec<f64>>,
}

pub const SYNTHETIC_EDGE_DIM: usize = 3;

impl EdgeFeatures {
    /// `[direction, ln(1 + out_degree(src)), ln(1 + in_degree(dst))]` with
    /// direction +1 when the path follows the citation and -1 against it.
    /// Degrees are taken from the full graph.
    pub fn synthesize(graph: &DirectedGraph, sub: &EgoSubgraph) -> Self {
        let mut forward = Vec::with_capacity(sub.local_edges.len());
        let mut backward = Vec::with_capacity(sub.local_edges.len());
        for &(u, v) in &sub.local_edges {
            let src_out = (graph.out_degree(sub.nodes[u]) as f64).ln_1p();
            let dst_in = (graph.in_degree(sub.nodes[v]) as f64).ln_1p();
            forward.push(vec![1.0, src_out, dst_in]);
            backward.push(vec![-1.0, src_out, dst_in]);
        }
        Self {
            dim: SYNTHETIC_EDGE_DIM,
            forward,
            backward,
        }
    }

    /// Externally supplied, direction-agnostic features (one row per local edge).
    pub fn external(rows: Vec<Vec<f64>>) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == dim), "ragged edge features");
        Self {
            dim,
            forward: rows.clone(),
            backward: rows,
        }
    }
}

/// For every ordered pair, the features of the edges along its shortest path,
/// flattened as `N * dim` values in path order.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFeatures {
    k: usize,
    dim: usize,
    paths: Vec<Vec<f64>>,
}

impl PathFeatures {
    pub fn build(sub: &EgoSubgraph, spd: &SpdMatrix, edges: &EdgeFeatures) -> Self {
        let adj = sub.undirected_adjacency();
        Self::build_with(sub, &adj, spd, edges)
    }

    pub(crate) fn build_with(
        sub: &EgoSubgraph,
        adj: &[Vec<(usize, usize)>],
        spd: &SpdMatrix,
        edges: &EdgeFeatures,
    ) -> Self {
        let k = sub.len();
        let mut paths = vec![Vec::new(); k * k];
        for i in 0..k {
            for j in 0..k {
                let Ok(path) = path_with(adj, i, j, spd) else {
                    continue;
                };
                let mut at = i;
                let mut feats = Vec::with_capacity(path.len() * edges.dim);
                for e in path {
                    let (u, v) = sub.local_edges[e];
                    if u == at {
                        feats.extend_from_slice(&edges.forward[e]);
                        at = v;
                    } else {
                        feats.extend_from_slice(&edges.backward[e]);
                        at = u;
                    }
                }
                paths[i * k + j] = feats;
            }
        }
        Self {
            k,
            dim: edges.dim,
            paths,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    /// Number of edges on the stored path for `(i, j)`.
    pub fn path_len(&self, i: usize, j: usize) -> usize {
        self.paths[i * self.k + j]
            .len()
            .checked_div(self.dim)
            .unwrap_or(0)
    }

    /// Feature vector of the `n`-th edge (0-based) on the path `(i, j)`.
    pub fn edge(&self, i: usize, j: usize, n: usize) -> &[f64] {
        &self.paths[i * self.k + j][n * self.dim..(n + 1) * self.dim]
    }
}

/// Local clustering coefficient on the undirected simple view.
pub fn clustering_coefficient(graph: &DirectedGraph, v: usize) -> f64 {
    let nbrs = graph.undirected_neighbors(v);
    let deg = nbrs.len();
    if deg < 2 {
        return 0.0;
    }
    let mut links = 0usize;
    for (a_pos, &a) in nbrs.iter().enumerate() {
        let a_nbrs = graph.undirected_neighbors(a);
        links += nbrs[a_pos + 1..]
            .iter()
            .filter(|b| a_nbrs.binary_search(b).is_ok())
            .count();
    }
    2.0 * links as f64 / (deg * (deg - 1)) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralStats {
    pub in_deg: Vec<usize>,
    pub out_deg: Vec<usize>,
    pub clustering: Vec<f64>,
}

impl StructuralStats {
    pub fn compute(graph: &DirectedGraph) -> Self {
        let n = graph.num_nodes();
        Self {
            in_deg: (0..n).map(|v| graph.in_degree(v)).collect(),
            out_deg: (0..n).map(|v| graph.out_degree(v)).collect(),
            clustering: (0..n)
                .into_par_iter()
                .map(|v| clustering_coefficient(graph, v))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn undirected_line(k: usize) -> EgoSubgraph {
        EgoSubgraph::from_parts((0..k).collect(), (1..k).map(|v| (v - 1, v)).collect())
    }

    #[test]
    fn singleton_spd() {
        let sub = EgoSubgraph::from_parts(vec![5], vec![]);
        let spd = bfs_spd(&sub, 3);
        assert_eq!(spd.as_slice(), &[0]);
    }

    #[test]
    fn line_distance_and_path() {
        let sub = undirected_line(3);
        let spd = bfs_spd(&sub, 5);
        assert_eq!(spd.get(0, 2), 2);
        assert_eq!(shortest_path_edges(&sub, 0, 2, &spd), Ok(vec![0, 1]));
        assert_eq!(shortest_path_edges(&sub, 1, 1, &spd), Ok(vec![]));
    }

    #[test]
    fn unreachable_is_distinct_from_empty() {
        let sub = EgoSubgraph::from_parts(vec![0, 1, 2], vec![(0, 1)]);
        let spd = bfs_spd(&sub, 4);
        assert_eq!(spd.get(0, 2), 5);
        assert_eq!(shortest_path_edges(&sub, 0, 2, &spd), Err(Unreachable));
    }

    #[test]
    fn cap_marks_far_pairs_unreachable() {
        let sub = undirected_line(5);
        let spd = bfs_spd(&sub, 2);
        assert_eq!(spd.get(0, 2), 2);
        assert_eq!(spd.get(0, 3), 3);
        assert!(!spd.is_reachable(0, 4));
    }

    #[test]
    fn tie_break_prefers_smallest_index() {
        // 0 - 1 - 3 and 0 - 2 - 3: both length 2.
        let sub = EgoSubgraph::from_parts(vec![0, 1, 2, 3], vec![(0, 2), (2, 3), (0, 1), (1, 3)]);
        let spd = bfs_spd(&sub, 5);
        assert_eq!(shortest_path_edges(&sub, 0, 3, &spd), Ok(vec![2, 3]));
    }

    #[test]
    fn path_features_follow_direction() {
        // 0 -> 1 and 2 -> 1: the path 0..2 walks the second edge backwards.
        let g = DirectedGraph::from_edge_list(&[(0, 1), (2, 1)], 3).unwrap();
        let sub = EgoSubgraph::from_parts(vec![0, 1, 2], vec![(0, 1), (2, 1)]);
        let spd = bfs_spd(&sub, 5);
        let pf = PathFeatures::build(&sub, &spd, &EdgeFeatures::synthesize(&g, &sub));
        assert_eq!(pf.path_len(0, 2), 2);
        assert_eq!(pf.edge(0, 2, 0)[0], 1.0);
        assert_eq!(pf.edge(0, 2, 1)[0], -1.0);
        assert_eq!(pf.path_len(1, 1), 0);
    }

    #[test]
    fn clustering_triangle_and_star() {
        let tri = DirectedGraph::from_edge_list(&[(0, 1), (1, 2), (2, 0)], 3).unwrap();
        for v in 0..3 {
            assert_eq!(clustering_coefficient(&tri, v), 1.0);
        }
        let star = DirectedGraph::from_edge_list(&[(0, 1), (0, 2), (0, 3), (4, 0)], 5).unwrap();
        assert_eq!(clustering_coefficient(&star, 0), 0.0);
        assert_eq!(clustering_coefficient(&star, 1), 0.0);
    }
}
