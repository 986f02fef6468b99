//! C ABI over the tagformer library.
//!
//! Every fallible function returns a [`TfStatus`]; on failure the message is
//! available from [`tf_last_error`] on the same thread. Objects are opaque
//! handles created by `*_new`/`*_load` and released with the matching
//! `*_free`. Functions that fill caller buffers of data-dependent size follow
//! a two-call protocol: pass null (or too small) buffers to learn the
//! required length, then call again.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use tagformer::autodiff::ParamStore;
use tagformer::cli::load_dataset;
use tagformer::config::RunConfig;
use tagformer::data::Dataset;
use tagformer::eval::evaluate;
use tagformer::features::encode_text;
use tagformer::graph::DirectedGraph;
use tagformer::model::Classifier;
use tagformer::structure::{bfs_spd, clustering_coefficient};
use tagformer::train::{predict_with, BatchBuilder, SamplingConfig, Trainer};
use tagformer::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Io = 3,
    Parse = 4,
    Config = 5,
    Checkpoint = 6,
    /// A caller buffer was missing or too small; the required length was
    /// written to the length out-parameter.
    BufferTooSmall = 7,
    Runtime = 8,
    Panic = 9,
}

/// A directed citation graph.
pub struct TfGraph(DirectedGraph);

/// A prepared dataset with a trained classifier.
pub struct TfModel {
    data: Dataset,
    classifier: Classifier,
    params: ParamStore,
    sampling: SamplingConfig,
    max_spd: usize,
    seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TfMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

fn status_of(err: &Error) -> TfStatus {
    match err {
        Error::Io { .. } => TfStatus::Io,
        Error::Parse { .. } => TfStatus::Parse,
        Error::Config(_) => TfStatus::Config,
        Error::Checkpoint(_) => TfStatus::Checkpoint,
        Error::NonFiniteLoss { .. } => TfStatus::Runtime,
        _ => TfStatus::InvalidInput,
    }
}

struct Fail(TfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TfStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(TfStatus::InvalidInput, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TfStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            TfStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_param<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))?;
    Ok(Path::new(s))
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn tf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a graph from `num_edges` directed edges `src[i] -> dst[i]`.
///
/// # Safety
/// `src` and `dst` must point to `num_edges` readable values, and `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_graph_new(
    src: *const usize,
    dst: *const usize,
    num_edges: usize,
    num_nodes: usize,
    out: *mut *mut TfGraph,
) -> TfStatus {
    guard(|| {
        let out = out_param(out, "out")?;
        *out = ptr::null_mut();
        let src = input(src, num_edges, "src")?;
        let dst = input(dst, num_edges, "dst")?;
        let edges: Vec<(usize, usize)> = src.iter().copied().zip(dst.iter().copied()).collect();
        let graph = DirectedGraph::from_edge_list(&edges, num_nodes)?;
        *out = Box::into_raw(Box::new(TfGraph(graph)));
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a handle from [`tf_graph_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tf_graph_free(graph: *mut TfGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tf_graph_size(
    graph: *const TfGraph,
    num_nodes: *mut usize,
    num_edges: *mut usize,
) -> TfStatus {
    guard(|| {
        let g = &handle(graph, "graph")?.0;
        *out_param(num_nodes, "num_nodes")? = g.num_nodes();
        *out_param(num_edges, "num_edges")? = g.num_edges();
        Ok(())
    })
}

/// Fills `in_deg` and `out_deg`, each of length `len` which must equal the
/// node count.
///
/// # Safety
/// `graph` must be a live handle; both buffers must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn tf_graph_degrees(
    graph: *const TfGraph,
    in_deg: *mut usize,
    out_deg: *mut usize,
    len: usize,
) -> TfStatus {
    guard(|| {
        let g = &handle(graph, "graph")?.0;
        if len != g.num_nodes() {
            return Err(invalid(format!(
                "buffer length {len} != {} nodes",
                g.num_nodes()
            )));
        }
        let ins = output(in_deg, len, "in_deg")?;
        let outs = output(out_deg, len, "out_deg")?;
        for v in 0..len {
            ins[v] = g.in_degree(v);
            outs[v] = g.out_degree(v);
        }
        Ok(())
    })
}

/// Local clustering coefficient of every node over the undirected view.
///
/// # Safety
/// `graph` must be a live handle; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn tf_graph_clustering(
    graph: *const TfGraph,
    out: *mut f64,
    len: usize,
) -> TfStatus {
    guard(|| {
        let g = &handle(graph, "graph")?.0;
        if len != g.num_nodes() {
            return Err(invalid(format!(
                "buffer length {len} != {} nodes",
                g.num_nodes()
            )));
        }
        for (v, c) in output(out, len, "out")?.iter_mut().enumerate() {
            *c = clustering_coefficient(g, v);
        }
        Ok(())
    })
}

/// Samples the ego subgraph of `center` and its shortest-path distances
/// capped at `max_spd` (unreachable pairs get `max_spd + 1`).
///
/// On return `*k` holds the subgraph size. `nodes` receives the global ids in
/// local order (center first) and `spd` the row-major `k×k` distances. When
/// `nodes_len < k` or `spd_len < k*k` nothing is written and
/// `TF_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `graph` must be a live handle, `k` valid, and each buffer either null or
/// writable for its stated length.
#[no_mangle]
pub unsafe extern "C" fn tf_graph_ego_spd(
    graph: *const TfGraph,
    center: usize,
    hops: usize,
    max_nodes: usize,
    seed: u64,
    max_spd: usize,
    nodes: *mut usize,
    nodes_len: usize,
    spd: *mut usize,
    spd_len: usize,
    k: *mut usize,
) -> TfStatus {
    guard(|| {
        let g = &handle(graph, "graph")?.0;
        let k = out_param(k, "k")?;
        if center >= g.num_nodes() {
            return Err(invalid(format!(
                "center {center} outside 0..{}",
                g.num_nodes()
            )));
        }
        if max_nodes == 0 {
            return Err(invalid("max_nodes must be positive"));
        }
        let sub = g.sample_ego_subgraph(center, hops, max_nodes, seed);
        let n = sub.len();
        *k = n;
        if nodes.is_null() || spd.is_null() || nodes_len < n || spd_len < n * n {
            return Err(Fail(
                TfStatus::BufferTooSmall,
                format!("need {n} node slots and {} distance slots", n * n),
            ));
        }
        let m = bfs_spd(&sub, max_spd);
        output(nodes, n, "nodes")?.copy_from_slice(&sub.nodes);
        output(spd, n * n, "spd")?.copy_from_slice(m.as_slice());
        Ok(())
    })
}

/// Accuracy and macro precision, recall and F1 of `len` predictions.
///
/// # Safety
/// `preds` and `labels` must hold `len` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tf_metrics(
    preds: *const usize,
    labels: *const usize,
    len: usize,
    num_classes: usize,
    out: *mut TfMetrics,
) -> TfStatus {
    guard(|| {
        let out = out_param(out, "out")?;
        let r = evaluate(
            input(preds, len, "preds")?,
            input(labels, len, "labels")?,
            num_classes,
        )?;
        *out = TfMetrics {
            accuracy: r.accuracy,
            macro_precision: r.macro_precision,
            macro_recall: r.macro_recall,
            macro_f1: r.macro_f1,
        };
        Ok(())
    })
}

/// Hashed bag-of-words embedding of a NUL-terminated UTF-8 string.
///
/// # Safety
/// `text` must be a valid C string and `out` must hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn tf_encode_text(
    text: *const c_char,
    dim: usize,
    seed: u64,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| invalid("text is not valid UTF-8"))?;
        output(out, dim, "out")?.copy_from_slice(&encode_text(text, dim, seed));
        Ok(())
    })
}

/// Loads the prepared dataset named by the run config at `config_path` and
/// the checkpoint at `checkpoint_path`.
///
/// # Safety
/// Both paths must be valid C strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_model_load(
    config_path: *const c_char,
    checkpoint_path: *const c_char,
    out: *mut *mut TfModel,
) -> TfStatus {
    guard(|| {
        let out = out_param(out, "out")?;
        *out = ptr::null_mut();
        let cfg = RunConfig::load(Some(path_arg(config_path, "config_path")?), &[])?;
        let ckpt = path_arg(checkpoint_path, "checkpoint_path")?;
        let data = load_dataset(&cfg)?;
        let train_cfg = cfg.train_config();
        let (classifier, mut params) = Trainer::new(
            &data,
            cfg.classifier,
            &cfg.model,
            &cfg.fusion.sources,
            &train_cfg,
            cfg.sampling,
        )?
        .into_parts();
        let bytes = std::fs::read(ckpt)
            .map_err(|e| Fail(TfStatus::Io, format!("{}: {e}", ckpt.display())))?;
        params.load_checkpoint(&bytes)?;
        *out = Box::into_raw(Box::new(TfModel {
            data,
            classifier,
            params,
            sampling: cfg.sampling,
            max_spd: cfg.model.max_spd,
            seed: train_cfg.seed,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`tf_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tf_model_free(model: *mut TfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tf_model_shape(
    model: *const TfModel,
    num_nodes: *mut usize,
    num_classes: *mut usize,
) -> TfStatus {
    guard(|| {
        let m = handle(model, "model")?;
        *out_param(num_nodes, "num_nodes")? = m.data.num_nodes();
        *out_param(num_classes, "num_classes")? = m.data.num_classes();
        Ok(())
    })
}

/// Predicted class of each of the `len` node ids in `nodes`.
///
/// # Safety
/// `model` must be a live handle; `nodes` and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn tf_model_predict(
    model: *const TfModel,
    nodes: *const usize,
    len: usize,
    out: *mut usize,
) -> TfStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let nodes = input(nodes, len, "nodes")?;
        if let Some(&bad) = nodes.iter().find(|&&v| v >= m.data.num_nodes()) {
            return Err(invalid(format!(
                "node {bad} outside 0..{}",
                m.data.num_nodes()
            )));
        }
        let out = output(out, len, "out")?;
        let batches = BatchBuilder::new(
            &m.data.graph,
            m.sampling,
            m.max_spd,
            m.seed,
            m.classifier.uses_structure(),
        );
        let preds = predict_with(&m.classifier, &m.params, &m.data, &batches, nodes)?;
        out.copy_from_slice(&preds);
        Ok(())
    })
}
