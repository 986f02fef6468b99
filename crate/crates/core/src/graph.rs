//! Directed citation graph in compressed sparse row form.
//!
//! Both adjacency directions are stored so in- and out-degree are O(1) and
//! traversals over the undirected view never need a transpose.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Counters describing what [`DirectedGraph::from_edge_list`] discarded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub self_loops: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    num_nodes: usize,
    out_offsets: Vec<usize>,
    out_targets: Vec<usize>,
    in_offsets: Vec<usize>,
    in_targets: Vec<usize>,
    // Union of out- and in-neighbours, sorted and deduplicated.
    und_offsets: Vec<usize>,
    und_targets: Vec<usize>,
    stats: IngestStats,
}

fn build_csr(num_nodes: usize, pairs: &[(usize, usize)]) -> (Vec<usize>, Vec<usize>) {
    // `pairs` must already be sorted by (row, col).
    let mut offsets = vec![0usize; num_nodes + 1];
    for &(row, _) in pairs {
        offsets[row + 1] += 1;
    }
    for i in 0..num_nodes {
        offsets[i + 1] += offsets[i];
    }
    let targets = pairs.iter().map(|&(_, col)| col).collect();
    (offsets, targets)
}

impl DirectedGraph {
    /// Builds the graph, dropping self-loops and merging parallel edges.
    /// Targets are sorted ascending per source.
    pub fn from_edge_list(edges: &[(usize, usize)], num_nodes: usize) -> Result<Self> {
        let mut stats = IngestStats::default();
        let mut fwd = Vec::with_capacity(edges.len());
        for (index, &(src, dst)) in edges.iter().enumerate() {
            if src >= num_nodes || dst >= num_nodes {
                return Err(Error::EdgeOutOfRange {
                    index,
                    src,
                    dst,
                    num_nodes,
                });
            }
            if src == dst {
                stats.self_loops += 1;
                continue;
            }
            fwd.push((src, dst));
        }
        fwd.sort_unstable();
        let before = fwd.len();
        fwd.dedup();
        stats.duplicates = before - fwd.len();

        let (out_offsets, out_targets) = build_csr(num_nodes, &fwd);

        let mut rev: Vec<(usize, usize)> = fwd.iter().map(|&(s, d)| (d, s)).collect();
        rev.sort_unstable();
        let (in_offsets, in_targets) = build_csr(num_nodes, &rev);

        let mut und = fwd;
        und.extend_from_slice(&rev);
        und.sort_unstable();
        und.dedup();
        let (und_offsets, und_targets) = build_csr(num_nodes, &und);

        Ok(Self {
            num_nodes,
            out_offsets,
            out_targets,
            in_offsets,
            in_targets,
            und_offsets,
            und_targets,
            stats,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.out_targets.len()
    }

    pub fn ingest_stats(&self) -> IngestStats {
        self.stats
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.out_offsets[v + 1] - self.out_offsets[v]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_offsets[v + 1] - self.in_offsets[v]
    }

    pub fn out_neighbors(&self, v: usize) -> &[usize] {
        &self.out_targets[self.out_offsets[v]..self.out_offsets[v + 1]]
    }

    pub fn in_neighbors(&self, v: usize) -> &[usize] {
        &self.in_targets[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    /// Neighbours in the undirected view, ascending.
    pub fn undirected_neighbors(&self, v: usize) -> &[usize] {
        &self.und_targets[self.und_offsets[v]..self.und_offsets[v + 1]]
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.out_neighbors(src).binary_search(&dst).is_ok()
    }

    /// All edges in (source, target) order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |v| self.out_neighbors(v).iter().map(move |&t| (v, t)))
    }

    pub fn out_csr(&self) -> (&[usize], &[usize]) {
        (&self.out_offsets, &self.out_targets)
    }

    pub fn in_csr(&self) -> (&[usize], &[usize]) {
        (&self.in_offsets, &self.in_targets)
    }

    /// Ego subgraph around `center`, grown breadth-first over the undirected
    /// view for at most `hops` levels. When a level would overflow `max_nodes`
    /// the level is subsampled uniformly without replacement.
    pub fn sample_ego_subgraph(
        &self,
        center: usize,
        hops: usize,
        max_nodes: usize,
        rng_seed: u64,
    ) -> EgoSubgraph {
        assert!(center < self.num_nodes, "center {center} out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut nodes = vec![center];
        let mut node_map = HashMap::from([(center, 0usize)]);
        let mut frontier = vec![center];

        for _ in 0..hops {
            let remaining = max_nodes.saturating_sub(nodes.len());
            if remaining == 0 || frontier.is_empty() {
                break;
            }
            let mut candidates: Vec<usize> = frontier
                .iter()
                .flat_map(|&v| self.undirected_neighbors(v).iter().copied())
                .filter(|u| !node_map.contains_key(u))
                .collect();
            candidates.sort_unstable();
            candidates.dedup();
            if candidates.len() > remaining {
                let mut picked =
                    rand::seq::index::sample(&mut rng, candidates.len(), remaining).into_vec();
                picked.sort_unstable();
                candidates = picked.into_iter().map(|i| candidates[i]).collect();
            }
            for &u in &candidates {
                node_map.insert(u, nodes.len());
                nodes.push(u);
            }
            frontier = candidates;
        }

        let mut local_edges = Vec::new();
        for (lu, &u) in nodes.iter().enumerate() {
            let mut row: Vec<usize> = self
                .out_neighbors(u)
                .iter()
                .filter_map(|v| node_map.get(v).copied())
                .collect();
            row.sort_unstable();
            local_edges.extend(row.into_iter().map(|lv| (lu, lv)));
        }

        EgoSubgraph {
            center,
            nodes,
            local_edges,
            node_map,
        }
    }
}

/// Induced subgraph around a center node. Local index 0 is the center.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EgoSubgraph {
    pub center: usize,
    pub nodes: Vec<usize>,
    /// Directed edges in local indices.
    pub local_edges: Vec<(usize, usize)>,
    pub node_map: HashMap<usize, usize>,
}

impl EgoSubgraph {
    /// Builds a subgraph directly from local data; `nodes[0]` is the center.
    pub fn from_parts(nodes: Vec<usize>, local_edges: Vec<(usize, usize)>) -> Self {
        let node_map = nodes.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        Self {
            center: nodes[0],
            nodes,
            local_edges,
            node_map,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Undirected adjacency: for each local node, `(neighbor, edge index)`
    /// pairs sorted by neighbor then edge index.
    pub fn undirected_adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (e, &(u, v)) in self.local_edges.iter().enumerate() {
            adj[u].push((v, e));
            adj[v].push((u, e));
        }
        for row in &mut adj {
            row.sort_unstable();
        }
        adj
    }

    /// Relabels local nodes: new local index `perm[i]` holds old node `i`.
    /// The center moves with the permutation.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.nodes.len());
        let mut nodes = vec![0; self.nodes.len()];
        for (old, &new) in perm.iter().enumerate() {
            nodes[new] = self.nodes[old];
        }
        let local_edges = self
            .local_edges
            .iter()
            .map(|&(u, v)| (perm[u], perm[v]))
            .collect();
        let node_map = nodes.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        Self {
            center: self.center,
            nodes,
            local_edges,
            node_map,
        }
    }
}

/// Reads a `src<TAB>dst` edge list. Blank lines and `#` comments are skipped.
pub fn read_edge_list(path: &Path) -> Result<Vec<(usize, usize)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut edges = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(path, i + 1, "expected `src<TAB>dst`"));
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(path, i + 1, format!("invalid node id {s:?}")))
        };
        edges.push((parse(a)?, parse(b)?));
    }
    Ok(edges)
}

pub fn write_edge_list(path: &Path, edges: &[(usize, usize)]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for &(s, d) in edges {
        writeln!(w, "{s}\t{d}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
