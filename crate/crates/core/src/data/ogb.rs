//! Reader for the raw ogbn-arxiv directory layout.
//!
//! Files are looked up in the directory itself and in its `raw/` and
//! `mapping/` subdirectories, each either plain or gzip-compressed (`.gz`):
//! - `edge.csv`: `src,dst` per line (src cites dst);
//! - `node-feat.csv`: one comma-separated feature row per node;
//! - `node-label.csv`: one class index per node (empty or negative: unlabeled);
//! - `node_year.csv`: one year per node;
//! - `labelidx2arxivcategeory.csv` (optional): header, then `idx,category`;
//! - `nodeidx2paperid.csv` (optional): header, then `idx,paper id`;
//! - `titleabs.tsv` (optional): `paper id<TAB>title<TAB>abstract`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::features::NodeDocument;

#[derive(Debug, Clone)]
pub struct OgbRaw {
    pub edges: Vec<(usize, usize)>,
    pub features: Tensor,
    pub docs: Vec<NodeDocument>,
    pub class_names: Vec<String>,
}

impl OgbRaw {
    pub fn num_nodes(&self) -> usize {
        self.docs.len()
    }
}

fn find(dir: &Path, name: &str) -> Option<PathBuf> {
    for sub in ["", "raw", "mapping"] {
        for ext in ["", ".gz"] {
            let p = dir.join(sub).join(format!("{name}{ext}"));
            if p.is_file() {
                return Some(p);
            }
        }
    }
    None
}

fn require(dir: &Path, name: &str) -> Result<PathBuf> {
    find(dir, name).ok_or_else(|| {
        Error::io(
            dir.join(name),
            std::io::Error::new(std::io::ErrorKind::NotFound, "required OGB file not found"),
        )
    })
}

/// Calls `f(line_number, line)` for every line, transparently gunzipping.
fn for_each_line(path: &Path, mut f: impl FnMut(usize, &str) -> Result<()>) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader: Box<dyn BufRead> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(BufReader::with_capacity(1 << 20, GzDecoder::new(file)))
    } else {
        Box::new(BufReader::with_capacity(1 << 20, file))
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        f(i + 1, line.trim_end_matches('\r'))?;
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("cannot parse {s:?}")))
}

fn read_column<T: std::str::FromStr>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for_each_line(path, |i, line| {
        out.push(parse(path, i, line)?);
        Ok(())
    })?;
    Ok(out)
}

fn read_pairs(path: &Path, header: bool) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for_each_line(path, |i, line| {
        if (header && i == 1) || line.is_empty() {
            return Ok(());
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(path, i, "expected two comma-separated fields"))?;
        out.push((parse(path, i, a)?, b.trim().to_string()));
        Ok(())
    })?;
    Ok(out)
}

pub fn load_ogb_dir(dir: &Path) -> Result<OgbRaw> {
    let edge_path = require(dir, "edge.csv")?;
    let mut edges = Vec::new();
    for_each_line(&edge_path, |i, line| {
        if line.is_empty() {
            return Ok(());
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(&edge_path, i, "expected `src,dst`"))?;
        edges.push((parse(&edge_path, i, a)?, parse(&edge_path, i, b)?));
        Ok(())
    })?;

    let year_path = require(dir, "node_year.csv")?;
    let years: Vec<i32> = read_column(&year_path)?;
    let n = years.len();

    let label_path = require(dir, "node-label.csv")?;
    let mut labels = Vec::with_capacity(n);
    for_each_line(&label_path, |i, line| {
        let t = line.trim();
        labels.push(
            if t.is_empty() || t.starts_with('-') || t.eq_ignore_ascii_case("nan") {
                None
            } else {
                Some(parse::<usize>(&label_path, i, t)?)
            },
        );
        Ok(())
    })?;
    if labels.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} has {} rows but {} has {n}",
            label_path.display(),
            labels.len(),
            year_path.display()
        )));
    }

    let feat_path = require(dir, "node-feat.csv")?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for_each_line(&feat_path, |i, line| {
        let before = data.len();
        for field in line.split(',') {
            data.push(parse::<f64>(&feat_path, i, field)?);
        }
        let width = data.len() - before;
        if *cols.get_or_insert(width) != width {
            return Err(Error::parse(
                &feat_path,
                i,
                format!("expected {} columns, found {width}", cols.unwrap()),
            ));
        }
        rows += 1;
        Ok(())
    })?;
    if rows != n {
        return Err(Error::InvalidInput(format!(
            "{} has {rows} rows but there are {n} nodes",
            feat_path.display()
        )));
    }
    let features = Tensor::matrix(n, cols.unwrap_or(0), data)?;

    let max_label = labels.iter().flatten().copied().max();
    let class_names = match find(dir, "labelidx2arxivcategeory.csv") {
        Some(p) => {
            let mut pairs = read_pairs(&p, true)?;
            pairs.sort_by_key(|(i, _)| *i);
            if pairs.iter().enumerate().any(|(pos, (i, _))| pos != *i) {
                return Err(Error::InvalidInput(format!(
                    "{}: label indices are not dense",
                    p.display()
                )));
            }
            pairs.into_iter().map(|(_, name)| name).collect()
        }
        None => (0..max_label.map_or(0, |m| m + 1))
            .map(|i| format!("class{i}"))
            .collect::<Vec<_>>(),
    };
    if let Some(m) = max_label.filter(|&m| m >= class_names.len()) {
        return Err(Error::InvalidInput(format!(
            "label {m} exceeds the {} known categories",
            class_names.len()
        )));
    }

    let paper_ids: Option<Vec<String>> = match find(dir, "nodeidx2paperid.csv") {
        Some(p) => {
            let mut ids = vec![String::new(); n];
            for (idx, pid) in read_pairs(&p, true)? {
                if idx >= n {
                    return Err(Error::InvalidInput(format!(
                        "{}: node {idx} out of range",
                        p.display()
                    )));
                }
                ids[idx] = pid;
            }
            Some(ids)
        }
        None => None,
    };
    let mut text: HashMap<String, (String, String)> = HashMap::new();
    if let Some(p) = find(dir, "titleabs.tsv") {
        for_each_line(&p, |_, line| {
            let mut parts = line.splitn(3, '\t');
            if let (Some(id), Some(title), abs) = (parts.next(), parts.next(), parts.next()) {
                text.insert(
                    id.trim().to_string(),
                    (title.to_string(), abs.unwrap_or("").to_string()),
                );
            }
            Ok(())
        })?;
    }

    let docs = (0..n)
        .map(|id| {
            let pid = paper_ids
                .as_ref()
                .map_or_else(|| id.to_string(), |p| p[id].clone());
            let (title, abstract_text) = match text.get(&pid) {
                Some((t, a)) if !t.trim().is_empty() => (t.clone(), a.clone()),
                _ => (format!("paper {pid}"), String::new()),
            };
            NodeDocument {
                id,
                title,
                abstract_text,
                label: labels[id],
                year: years[id],
            }
        })
        .collect();

    Ok(OgbRaw {
        edges,
        features,
        docs,
        class_names,
    })
}
