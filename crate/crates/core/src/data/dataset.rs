//! Prepared dataset artifact.
//!
//! Layout (little-endian): magic `TAGDSET1`, `u64` node count, `u64` edge
//! count and `u64` pairs, per node an `i64` label (`-1` when absent) and an
//! `i32` year, `u32` class count with length-prefixed UTF-8 names, then the
//! four embedding matrices in source order (`u64` rows, `u64` cols, `f64`
//! payload). A SHA-256 digest of everything before it closes the file.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::features::{EmbeddingBundle, Source};
use crate::graph::DirectedGraph;

const MAGIC: &[u8; 8] = b"TAGDSET1";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: DirectedGraph,
    pub labels: Vec<Option<usize>>,
    pub years: Vec<i32>,
    pub class_names: Vec<String>,
    pub bundle: EmbeddingBundle,
}

impl Dataset {
    pub fn new(
        graph: DirectedGraph,
        labels: Vec<Option<usize>>,
        years: Vec<i32>,
        class_names: Vec<String>,
        bundle: EmbeddingBundle,
    ) -> Result<Self> {
        let n = graph.num_nodes();
        if labels.len() != n || years.len() != n || bundle.num_nodes() != n {
            return Err(Error::InvalidInput(format!(
                "graph has {n} nodes but {} labels, {} years, {} embedding rows",
                labels.len(),
                years.len(),
                bundle.num_nodes()
            )));
        }
        let c = class_names.len();
        if let Some((i, l)) = labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.filter(|&l| l >= c).map(|l| (i, l)))
        {
            return Err(Error::InvalidInput(format!(
                "node {i} has label {l} but only {c} classes"
            )));
        }
        if bundle.dim(Source::Pred) != c {
            return Err(Error::InvalidInput(format!(
                "prediction embeddings have {} columns for {c} classes",
                bundle.dim(Source::Pred)
            )));
        }
        Ok(Self {
            graph,
            labels,
            years,
            class_names,
            bundle,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn label(&self, v: usize) -> Option<usize> {
        self.labels[v]
    }

    fn payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.write_u64::<LE>(self.num_nodes() as u64).unwrap();
        out.write_u64::<LE>(self.graph.num_edges() as u64).unwrap();
        for (s, d) in self.graph.edges() {
            out.write_u64::<LE>(s as u64).unwrap();
            out.write_u64::<LE>(d as u64).unwrap();
        }
        for (label, &year) in self.labels.iter().zip(&self.years) {
            out.write_i64::<LE>(label.map_or(-1, |l| l as i64)).unwrap();
            out.write_i32::<LE>(year).unwrap();
        }
        out.write_u32::<LE>(self.class_names.len() as u32).unwrap();
        for name in &self.class_names {
            out.write_u32::<LE>(name.len() as u32).unwrap();
            out.extend_from_slice(name.as_bytes());
        }
        for s in Source::ALL {
            let m = self.bundle.source(s);
            out.write_u64::<LE>(m.rows() as u64).unwrap();
            out.write_u64::<LE>(m.cols() as u64).unwrap();
            for &x in m.data() {
                out.write_f64::<LE>(x).unwrap();
            }
        }
        out
    }

    /// Serialized artifact and the hex SHA-256 of its payload.
    pub fn to_bytes(&self) -> (Vec<u8>, String) {
        let mut bytes = self.payload();
        let digest = Sha256::digest(&bytes);
        bytes.extend_from_slice(&digest);
        (bytes, hex::encode(digest))
    }

    pub fn content_hash(&self) -> String {
        self.to_bytes().1
    }

    /// Writes the artifact and a sibling `<path>.sha256`; returns the hash.
    pub fn save(&self, path: &Path) -> Result<String> {
        let (bytes, hash) = self.to_bytes();
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let hash_path = hash_file(path);
        std::fs::write(&hash_path, format!("{hash}\n")).map_err(|e| Error::io(hash_path, e))?;
        Ok(hash)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::InvalidInput(m) => Error::InvalidInput(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidInput(format!("dataset artifact {m}"));
        if bytes.len() < MAGIC.len() + 32 || &bytes[..8] != MAGIC {
            return Err(bad("has no TAGDSET1 header"));
        }
        let (payload, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(payload).as_slice() != digest {
            return Err(bad(
                "content hash mismatch; the file is corrupt or was modified",
            ));
        }
        let mut r = Cursor::new(&payload[8..]);
        let truncated = |_| bad("is truncated");
        let n = r.read_u64::<LE>().map_err(truncated)? as usize;
        let m = r.read_u64::<LE>().map_err(truncated)? as usize;
        let mut edges = Vec::with_capacity(m.min(payload.len() / 16));
        for _ in 0..m {
            let s = r.read_u64::<LE>().map_err(truncated)? as usize;
            let d = r.read_u64::<LE>().map_err(truncated)? as usize;
            edges.push((s, d));
        }
        let mut labels = Vec::with_capacity(n.min(payload.len()));
        let mut years = Vec::with_capacity(n.min(payload.len()));
        for _ in 0..n {
            let l = r.read_i64::<LE>().map_err(truncated)?;
            labels.push(usize::try_from(l).ok());
            years.push(r.read_i32::<LE>().map_err(truncated)?);
        }
        let c = r.read_u32::<LE>().map_err(truncated)? as usize;
        let mut class_names = Vec::with_capacity(c.min(payload.len()));
        for _ in 0..c {
            let len = r.read_u32::<LE>().map_err(truncated)? as usize;
            let mut buf = vec![0; len.min(payload.len())];
            r.read_exact(&mut buf).map_err(truncated)?;
            class_names
                .push(String::from_utf8(buf).map_err(|_| bad("has a non-UTF-8 class name"))?);
        }
        let mut mats = Vec::with_capacity(4);
        for _ in Source::ALL {
            let rows = r.read_u64::<LE>().map_err(truncated)? as usize;
            let cols = r.read_u64::<LE>().map_err(truncated)? as usize;
            let len = rows
                .checked_mul(cols)
                .ok_or_else(|| bad("has an oversized matrix"))?;
            if len > payload.len() / 8 {
                return Err(bad("is truncated"));
            }
            let mut data = vec![0.0; len];
            r.read_f64_into::<LE>(&mut data).map_err(truncated)?;
            mats.push(Tensor::matrix(rows, cols, data)?);
        }
        if r.position() as usize != payload.len() - 8 {
            return Err(bad("has trailing bytes"));
        }
        let mut it = mats.into_iter();
        let bundle = EmbeddingBundle {
            expl: it.next().unwrap(),
            pred: it.next().unwrap(),
            text: it.next().unwrap(),
            ogb: it.next().unwrap(),
        };
        let graph = DirectedGraph::from_edge_list(&edges, n)?;
        Self::new(graph, labels, years, class_names, bundle)
    }
}

pub fn hash_file(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".sha256");
    name.into()
}
