//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tagformer::autodiff::{ParamStore, Tape, Tensor, Var};
use tagformer::data::synthetic::{generate, SyntheticParams};
use tagformer::data::{assemble, Dataset};
use tagformer::features::{BundleOptions, LlmCache, Source};
use tagformer::graph::{DirectedGraph, EgoSubgraph};
use tagformer::model::{GraphormerConfig, GraphormerModel, SubgraphBatch};
use tagformer::structure::PathFeatures;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// Random directed subgraph on `k` local nodes with edge probability `p`.
pub fn random_subgraph(rng: &mut ChaCha8Rng, k: usize, p: f64) -> EgoSubgraph {
    let mut edges = Vec::new();
    for u in 0..k {
        for v in 0..k {
            if u != v && rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    EgoSubgraph::from_parts((0..k).collect(), edges)
}

/// All-pairs hop distances on the undirected view, capped: pairs farther
/// than `cap` or disconnected get `cap + 1`.
pub fn floyd_warshall(k: usize, edges: &[(usize, usize)], cap: usize) -> Vec<usize> {
    const INF: usize = usize::MAX / 4;
    let mut d = vec![INF; k * k];
    for i in 0..k {
        d[i * k + i] = 0;
    }
    for &(u, v) in edges {
        d[u * k + v] = 1;
        d[v * k + u] = 1;
    }
    for m in 0..k {
        for i in 0..k {
            for j in 0..k {
                let via = d[i * k + m] + d[m * k + j];
                if via < d[i * k + j] {
                    d[i * k + j] = via;
                }
            }
        }
    }
    d.into_iter()
        .map(|x| if x > cap { cap + 1 } else { x })
        .collect()
}

/// Undirected hop distance from `src` to every node of an edge list.
pub fn bfs_distances(n: usize, edges: &[(usize, usize)], src: usize) -> Vec<Option<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut dist = vec![None; n];
    dist[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

/// Clustering coefficient by enumerating every neighbour pair.
pub fn brute_clustering(n: usize, edges: &[(usize, usize)], v: usize) -> f64 {
    let mut adj = vec![BTreeSet::new(); n];
    for &(a, b) in edges {
        if a != b {
            adj[a].insert(b);
            adj[b].insert(a);
        }
    }
    let nbrs: Vec<usize> = adj[v].iter().copied().collect();
    let k = nbrs.len();
    if k < 2 {
        return 0.0;
    }
    let mut closed = 0;
    for a in 0..k {
        for b in 0..k {
            if a != b && adj[nbrs[a]].contains(&nbrs[b]) {
                closed += 1;
            }
        }
    }
    closed as f64 / (k * (k - 1)) as f64
}

/// Worst `|analytic - numeric| / max(1, |analytic|)` over every scalar of
/// every parameter, with central differences of step `h`.
pub fn gradient_error(
    params: &mut ParamStore,
    h: f64,
    f: impl Fn(&mut Tape, &ParamStore) -> Var,
) -> f64 {
    params.zero_grad();
    let mut tape = Tape::new();
    let loss = f(&mut tape, params);
    tape.backward(loss, params).unwrap();
    let ids: Vec<_> = params.ids().collect();
    let mut worst: f64 = 0.0;
    for id in ids {
        let analytic = params.grad(id).clone();
        for i in 0..params.value(id).numel() {
            let orig = params.value(id).data()[i];
            params.value_mut(id).data_mut()[i] = orig + h;
            let mut t = Tape::new();
            let v = f(&mut t, params);
            let plus = t.value(v).item();
            params.value_mut(id).data_mut()[i] = orig - h;
            let mut t = Tape::new();
            let v = f(&mut t, params);
            let minus = t.value(v).item();
            params.value_mut(id).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.data()[i];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    worst
}

/// Small labeled dataset from the synthetic generator.
pub fn tiny_dataset(nodes: usize, classes: usize, seed: u64) -> Dataset {
    let params = SyntheticParams {
        num_nodes: nodes,
        num_classes: classes,
        seed,
        ..SyntheticParams::default()
    };
    dataset_from(&params, 16)
}

pub fn dataset_from(params: &SyntheticParams, text_dim: usize) -> Dataset {
    let corpus = generate(params).unwrap();
    let opts = BundleOptions {
        text_dim,
        top_k: params.top_k,
        ..BundleOptions::default()
    };
    assemble(
        &corpus.docs,
        &corpus.edges,
        corpus.class_names,
        &LlmCache::from_records(corpus.records),
        corpus.ogb_features,
        &opts,
    )
    .unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// A random connected-ish graph of `k` nodes, its whole-graph ego batch and
/// random `text` (width 5) and `pred` (width 3) inputs.
pub struct ModelCase {
    pub batch: SubgraphBatch,
    pub inputs: Vec<(Source, Tensor)>,
}

pub const CASE_DIMS: [(Source, usize); 2] = [(Source::Text, 5), (Source::Pred, 3)];

pub fn model_case(seed: u64, k: usize, max_spd: usize) -> ModelCase {
    let mut r = rng(seed);
    let mut edges: Vec<(usize, usize)> = (1..k).map(|v| (v, r.random_range(0..v))).collect();
    for _ in 0..k {
        let (u, v) = (r.random_range(0..k), r.random_range(0..k));
        edges.push((u, v));
    }
    let g = DirectedGraph::from_edge_list(&edges, k).unwrap();
    let center = r.random_range(0..k);
    let sub = g.sample_ego_subgraph(center, k, k, seed);
    assert_eq!(sub.len(), k);
    let batch = SubgraphBatch::build(&g, &sub, max_spd);
    let inputs = CASE_DIMS
        .iter()
        .map(|&(s, d)| (s, random_tensor(&mut r, &[k, d])))
        .collect();
    ModelCase { batch, inputs }
}

pub fn tiny_config(layers: usize, heads: usize, d: usize, classes: usize) -> GraphormerConfig {
    GraphormerConfig {
        num_layers: layers,
        num_heads: heads,
        d_model: d,
        d_ffn: 2 * d,
        max_spd: 4,
        max_degree_bucket: 6,
        num_classes: classes,
        ..GraphormerConfig::default()
    }
}

pub fn tiny_model(cfg: &GraphormerConfig, seed: u64) -> (ParamStore, GraphormerModel) {
    let mut params = ParamStore::new();
    let active: Vec<Source> = CASE_DIMS.iter().map(|d| d.0).collect();
    let model =
        GraphormerModel::new(cfg, &mut params, &mut rng(seed), &CASE_DIMS, &active).unwrap();
    // Fresh tables are near zero; widen them so structure visibly matters.
    for name in [
        "centrality.in_degree",
        "centrality.out_degree",
        "spatial.bias",
        "edge.weights",
    ] {
        let id = params.id(name).unwrap();
        let shape = params.value(id).shape().to_vec();
        *params.value_mut(id) = random_tensor(&mut rng(seed ^ name.len() as u64), &shape);
    }
    (params, model)
}

pub fn permute_rows(t: &Tensor, perm: &[usize]) -> Tensor {
    let (rows, cols) = (t.rows(), t.cols());
    let mut out = vec![0.0; rows * cols];
    for (old, &new) in perm.iter().enumerate() {
        out[new * cols..(new + 1) * cols].copy_from_slice(t.row(old));
    }
    Tensor::matrix(rows, cols, out).unwrap()
}

/// Row-wise layer norm followed by an affine map, computed directly.
pub fn layer_norm_ref(x: &[f64], gain: &[f64], bias: &[f64], eps: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    x.iter()
        .enumerate()
        .map(|(i, v)| gain[i] * (v - mean) / (var + eps).sqrt() + bias[i])
        .collect()
}

/// Registers one random parameter per shape, applies `op` and reduces the
/// result against fixed random weights so every output element matters.
/// Returns the worst relative gradient error.
pub fn op_gradient_error(
    seed: u64,
    shapes: &[&[usize]],
    op: impl Fn(&mut Tape, &[Var]) -> Var,
) -> f64 {
    let mut r = rng(seed);
    let mut params = ParamStore::new();
    let ids: Vec<_> = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| params.add(format!("p{i}"), random_tensor(&mut r, s)))
        .collect();
    let probe = {
        let mut t = Tape::new();
        let vars: Vec<Var> = ids.iter().map(|&id| t.param(&params, id)).collect();
        let out = op(&mut t, &vars);
        random_tensor(&mut r, t.value(out).shape())
    };
    gradient_error(&mut params, 1e-5, |tape, params| {
        let vars: Vec<Var> = ids.iter().map(|&id| tape.param(params, id)).collect();
        let out = op(tape, &vars);
        let w = tape.constant(probe.clone());
        let prod = tape.mul(out, w).unwrap();
        tape.sum(prod)
    })
}

/// Accuracy and per-class `(precision, recall, f1)` from raw pairs, with
/// undefined ratios counted as zero.
pub fn metrics_oracle(preds: &[usize], labels: &[usize], c: usize) -> (f64, Vec<(f64, f64, f64)>) {
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    let per_class = (0..c)
        .map(|k| {
            let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
            for (&p, &l) in preds.iter().zip(labels) {
                match (p == k, l == k) {
                    (true, true) => tp += 1.0,
                    (true, false) => fp += 1.0,
                    (false, true) => fn_ += 1.0,
                    _ => {}
                }
            }
            let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            let f = if p + r > 0.0 {
                2.0 * p * r / (p + r)
            } else {
                0.0
            };
            (p, r, f)
        })
        .collect();
    (correct as f64 / preds.len() as f64, per_class)
}

/// Path-averaged edge term for head `h`: `(1/N) Σ_n x_n · w[h][n]`, zero for
/// empty paths.
pub fn edge_term(paths: &PathFeatures, weights: &Tensor, h: usize, i: usize, j: usize) -> f64 {
    let n = paths.path_len(i, j);
    let mut c = 0.0;
    for step in 0..n {
        let x = paths.edge(i, j, step);
        for (f, v) in x.iter().enumerate() {
            c += v * weights.at(h, step * x.len() + f);
        }
    }
    if n > 0 {
        c / n as f64
    } else {
        0.0
    }
}

pub type OpFn = Box<dyn Fn(&mut Tape, &[Var]) -> Var>;

/// Every differentiable tape op with input shapes.
pub fn op_suite() -> Vec<(&'static str, Vec<Vec<usize>>, OpFn)> {
    fn case(
        name: &'static str,
        shapes: &[&[usize]],
        f: impl Fn(&mut Tape, &[Var]) -> Var + 'static,
    ) -> (&'static str, Vec<Vec<usize>>, OpFn) {
        (
            name,
            shapes.iter().map(|s| s.to_vec()).collect(),
            Box::new(f),
        )
    }
    vec![
        case("matmul", &[&[3, 4], &[4, 2]], |t, v| {
            t.matmul(v[0], v[1]).unwrap()
        }),
        case("add", &[&[3, 4], &[3, 4]], |t, v| {
            t.add(v[0], v[1]).unwrap()
        }),
        case("bias_add", &[&[3, 4], &[4]], |t, v| {
            t.bias_add(v[0], v[1]).unwrap()
        }),
        case("mul_scalar", &[&[2, 5]], |t, v| t.mul_scalar(v[0], -1.7)),
        case("mul", &[&[3, 3], &[3, 3]], |t, v| {
            t.mul(v[0], v[1]).unwrap()
        }),
        case("concat rows", &[&[2, 3], &[1, 3], &[3, 3]], |t, v| {
            t.concat(v, 0).unwrap()
        }),
        case("concat cols", &[&[3, 2], &[3, 1], &[3, 4]], |t, v| {
            t.concat(v, 1).unwrap()
        }),
        case("embedding_lookup", &[&[5, 3]], |t, v| {
            t.embedding_lookup(v[0], &[4, 0, 4, 2, 2, 2]).unwrap()
        }),
        case("relu", &[&[4, 5]], |t, v| t.relu(v[0])),
        case("tanh", &[&[4, 5]], |t, v| t.tanh(v[0])),
        case("layer_norm", &[&[4, 6], &[6], &[6]], |t, v| {
            t.layer_norm(v[0], v[1], v[2], 1e-5).unwrap()
        }),
        case("softmax", &[&[3, 5]], |t, v| t.softmax(v[0])),
        case("mean rows", &[&[4, 3]], |t, v| t.mean(v[0], 0).unwrap()),
        case("mean cols", &[&[4, 3]], |t, v| t.mean(v[0], 1).unwrap()),
        case("sum", &[&[2, 3]], |t, v| t.sum(v[0])),
        case("transpose", &[&[2, 5]], |t, v| t.transpose(v[0]).unwrap()),
        case("slice_cols", &[&[3, 6]], |t, v| {
            t.slice_cols(v[0], 2, 3).unwrap()
        }),
        case("reshape", &[&[2, 6]], |t, v| {
            t.reshape(v[0], &[3, 4]).unwrap()
        }),
        case("cross_entropy", &[&[4, 5]], |t, v| {
            t.smoothed_cross_entropy(v[0], &[0, 4, 2, 2], 0.1).unwrap()
        }),
        case("cross_entropy eps=0", &[&[3, 4]], |t, v| {
            t.smoothed_cross_entropy(v[0], &[3, 0, 1], 0.0).unwrap()
        }),
    ]
}

/// Worst relative gradient error over every op in [`op_suite`].
pub fn worst_op_error() -> (f64, &'static str) {
    op_suite()
        .into_iter()
        .enumerate()
        .map(|(i, (name, shapes, f))| {
            let shapes: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
            (op_gradient_error(i as u64 + 1, &shapes, f), name)
        })
        .fold((0.0, ""), |a, b| if b.0 > a.0 { b } else { a })
}
