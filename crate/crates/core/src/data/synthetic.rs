//! Planted-partition citation corpus for desk-scale benchmarks.
//!
//! Nodes are ordered by publication year and cite up to `citation_window`
//! immediately preceding nodes, preferring their own class with probability
//! `homophily`. A fraction `text_signal` of
//! documents mention their class name and class-specific terms; the rest use
//! shared filler vocabulary only. OGB-style features are a class centroid
//! scaled by `ogb_signal` plus unit Gaussian noise.
//!
//! LLM records come from the stub provider. With probability
//! `llm_knowledge` the provider also reads a sentence naming the class that
//! is not part of the exported abstract, standing in for what a hosted model
//! knows beyond the text it is shown.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::features::matrix::write_matrix_csv;
use crate::features::{
    stub_llm_provider, write_class_names, write_documents, write_llm_records, LlmRecord,
    NodeDocument,
};
use crate::graph::write_edge_list;

const TOPICS: [&str; 12] = [
    "astrophysics",
    "genomics",
    "robotics",
    "cryptography",
    "linguistics",
    "seismology",
    "topology",
    "epidemiology",
    "optics",
    "economics",
    "ecology",
    "acoustics",
];

const FILLER: [&str; 24] = [
    "we",
    "propose",
    "a",
    "novel",
    "method",
    "for",
    "the",
    "analysis",
    "of",
    "results",
    "show",
    "improved",
    "performance",
    "on",
    "several",
    "benchmarks",
    "using",
    "data",
    "model",
    "approach",
    "study",
    "framework",
    "evaluation",
    "experiments",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub num_nodes: usize,
    pub num_classes: usize,
    /// Probability that a document carries class-indicative text.
    pub text_signal: f64,
    /// Probability that a citation goes to a node of the same class.
    pub homophily: f64,
    pub ogb_signal: f64,
    pub ogb_dim: usize,
    pub citations_per_node: usize,
    /// How far back citations reach. Zero means no limit.
    pub citation_window: usize,
    /// Fraction of nodes with a cached LLM record.
    pub llm_coverage: f64,
    /// Probability that the LLM recognises the class without textual cues.
    pub llm_knowledge: f64,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            num_nodes: 400,
            num_classes: 4,
            text_signal: 0.7,
            homophily: 0.85,
            ogb_signal: 0.1,
            ogb_dim: 16,
            citations_per_node: 4,
            citation_window: 80,
            llm_coverage: 1.0,
            llm_knowledge: 0.0,
            top_k: 5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub docs: Vec<NodeDocument>,
    pub edges: Vec<(usize, usize)>,
    pub class_names: Vec<String>,
    pub records: Vec<LlmRecord>,
    pub ogb_features: Tensor,
}

pub fn class_names(c: usize) -> Vec<String> {
    (0..c)
        .map(|i| match TOPICS.get(i) {
            Some(t) => (*t).to_string(),
            None => format!("topic{i}"),
        })
        .collect()
}

/// Sizes of the train, validation and test year ranges.
fn partition_sizes(n: usize) -> (usize, usize, usize) {
    let val = n / 5;
    let test = n / 5;
    (n - val - test, val, test)
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} {p} outside [0, 1]")))
            }
        };
        prob("text_signal", self.text_signal)?;
        prob("homophily", self.homophily)?;
        prob("llm_coverage", self.llm_coverage)?;
        prob("llm_knowledge", self.llm_knowledge)?;
        if self.num_classes < 2 {
            return Err(Error::Config(
                "synthetic corpus needs at least 2 classes".into(),
            ));
        }
        let (_, val, test) = partition_sizes(self.num_nodes);
        if val.min(test) < self.num_classes {
            return Err(Error::Config(format!(
                "{} nodes cannot place all {} classes in every split partition (need at least {})",
                self.num_nodes,
                self.num_classes,
                5 * self.num_classes
            )));
        }
        if self.ogb_dim == 0 || self.top_k == 0 || !self.ogb_signal.is_finite() {
            return Err(Error::Config(
                "ogb_dim and top_k must be positive, ogb_signal finite".into(),
            ));
        }
        Ok(())
    }
}

fn balanced_labels(len: usize, c: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..len).map(|i| i % c).collect();
    labels.shuffle(rng);
    labels
}

fn document_text(
    label: usize,
    informative: bool,
    names: &[String],
    rng: &mut ChaCha8Rng,
) -> (String, String) {
    let filler = |rng: &mut ChaCha8Rng, n: usize| -> Vec<String> {
        (0..n)
            .map(|_| FILLER[rng.random_range(0..FILLER.len())].to_string())
            .collect()
    };
    let class_word = |rng: &mut ChaCha8Rng| format!("{}{}", names[label], rng.random_range(0..6));
    let mut title = filler(rng, 4);
    let mut body = filler(rng, 8);
    if informative {
        title.insert(rng.random_range(0..=title.len()), names[label].clone());
        for _ in 0..4 {
            let w = class_word(rng);
            body.insert(rng.random_range(0..=body.len()), w);
        }
        body.insert(rng.random_range(0..=body.len()), names[label].clone());
    }
    let mut title = title.join(" ");
    if let Some(first) = title.get_mut(..1) {
        first.make_ascii_uppercase();
    }
    (title, body.join(" ") + ".")
}

pub fn generate(params: &SyntheticParams) -> Result<SyntheticCorpus> {
    params.validate()?;
    let n = params.num_nodes;
    let c = params.num_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let names = class_names(c);
    let (n_train, n_val, n_test) = partition_sizes(n);

    let mut labels = balanced_labels(n_train, c, &mut rng);
    labels.extend(balanced_labels(n_val, c, &mut rng));
    labels.extend(balanced_labels(n_test, c, &mut rng));
    let years: Vec<i32> = (0..n)
        .map(|i| {
            if i < n_train {
                2010 + (8 * i / n_train) as i32
            } else if i < n_train + n_val {
                2018
            } else {
                2019 + (2 * (i - n_train - n_val) / n_test) as i32
            }
        })
        .collect();

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    let mut edges = Vec::new();
    for v in 0..n {
        let lo = match params.citation_window {
            0 => 0,
            w => v.saturating_sub(w),
        };
        let cites = params.citations_per_node.min(v - lo);
        let mut chosen: Vec<usize> = Vec::with_capacity(cites);
        let mut attempts = 0;
        let same = &by_class[labels[v]];
        let recent = &same[same.partition_point(|&u| u < lo)..];
        while chosen.len() < cites && attempts < 20 * cites {
            attempts += 1;
            let u = if !recent.is_empty() && rng.random_bool(params.homophily) {
                recent[rng.random_range(0..recent.len())]
            } else {
                rng.random_range(lo..v)
            };
            if !chosen.contains(&u) {
                chosen.push(u);
            }
        }
        chosen.sort_unstable();
        edges.extend(chosen.into_iter().map(|u| (v, u)));
        by_class[labels[v]].push(v);
    }

    let docs: Vec<NodeDocument> = (0..n)
        .map(|id| {
            let informative = rng.random_bool(params.text_signal);
            let (title, abstract_text) = document_text(labels[id], informative, &names, &mut rng);
            NodeDocument {
                id,
                title,
                abstract_text,
                label: Some(labels[id]),
                year: years[id],
            }
        })
        .collect();

    let mut records = Vec::with_capacity(n);
    for d in &docs {
        let knows = rng.random_bool(params.llm_knowledge);
        if !rng.random_bool(params.llm_coverage) {
            continue;
        }
        let seen = if knows {
            let label = d.label.expect("generated nodes are labeled");
            let mut doc = d.clone();
            doc.abstract_text = format!(
                "{} This work belongs to {}.",
                doc.abstract_text, names[label]
            );
            doc
        } else {
            d.clone()
        };
        records.push(stub_llm_provider(
            &seen,
            &names,
            params.top_k,
            params.seed ^ d.id as u64,
        ));
    }

    let d = params.ogb_dim;
    let centroids: Vec<f64> = (0..c * d)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let mut feats = Vec::with_capacity(n * d);
    for &label in &labels {
        for j in 0..d {
            let noise: f64 = StandardNormal.sample(&mut rng);
            feats.push(params.ogb_signal * centroids[label * d + j] + noise);
        }
    }

    Ok(SyntheticCorpus {
        docs,
        edges,
        class_names: names,
        records,
        ogb_features: Tensor::matrix(n, d, feats)?,
    })
}

pub const NODES_FILE: &str = "nodes.jsonl";
pub const EDGES_FILE: &str = "edges.tsv";
pub const LLM_FILE: &str = "llm_cache.jsonl";
pub const OGB_FILE: &str = "ogb_features.csv";
pub const CLASSES_FILE: &str = "classes.txt";
pub const RUN_CONFIG_FILE: &str = "run.toml";

/// Benchmark run configuration written next to a generated corpus. Paths
/// are relative to the config file.
pub const BENCHMARK_CONFIG: &str = r#"# Desk-scale benchmark for a generated corpus.
seed = 0

[paths]
nodes = "nodes.jsonl"
edges = "edges.tsv"
ogb_features = "ogb_features.csv"
llm_cache = "llm_cache.jsonl"
classes = "classes.txt"
dataset = "dataset.bin"
out_dir = "runs"

[features]
text_dim = 64
top_k = 5

[model]
num_layers = 2
num_heads = 4
d_model = 32
d_ffn = 64
max_spd = 4
max_degree_bucket = 32

[sampling]
hops = 2
max_nodes = 16

[train]
epochs = 40
base_lr = 0.003
label_smoothing = 0.1
batch_size = 16
early_stop_patience = 10
"#;

pub fn write_corpus(dir: &Path, corpus: &SyntheticCorpus) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_documents(&dir.join(NODES_FILE), &corpus.docs)?;
    write_edge_list(&dir.join(EDGES_FILE), &corpus.edges)?;
    write_llm_records(&dir.join(LLM_FILE), &corpus.records, &corpus.class_names)?;
    write_matrix_csv(&dir.join(OGB_FILE), &corpus.ogb_features)?;
    write_class_names(&dir.join(CLASSES_FILE), &corpus.class_names)?;
    let cfg = dir.join(RUN_CONFIG_FILE);
    std::fs::write(&cfg, BENCHMARK_CONFIG).map_err(|e| Error::io(cfg, e))
}
