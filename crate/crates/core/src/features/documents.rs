use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One paper: its text, publication year and (if known) class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDocument {
    pub id: usize,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub label: Option<usize>,
    pub year: i32,
}

impl NodeDocument {
    /// Title and abstract joined for encoding.
    pub fn full_text(&self) -> String {
        format!("{}\n{}", self.title, self.abstract_text)
    }
}

/// Reads node documents from JSONL. Ids must be exactly `0..n` (in any order)
/// and titles non-empty; the result is sorted by id.
pub fn load_documents(path: &Path) -> Result<Vec<NodeDocument>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: NodeDocument =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if doc.title.trim().is_empty() {
            return Err(Error::parse(
                path,
                i + 1,
                format!("node {} has an empty title", doc.id),
            ));
        }
        if !seen.insert(doc.id) {
            return Err(Error::parse(
                path,
                i + 1,
                format!("duplicate node id {}", doc.id),
            ));
        }
        docs.push(doc);
    }
    docs.sort_by_key(|d| d.id);
    if let Some((pos, d)) = docs.iter().enumerate().find(|(pos, d)| d.id != *pos) {
        return Err(Error::InvalidInput(format!(
            "{}: node ids must be dense 0..{}; id {} found where {pos} expected",
            path.display(),
            docs.len(),
            d.id
        )));
    }
    Ok(docs)
}

pub fn write_documents(path: &Path, docs: &[NodeDocument]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for d in docs {
        serde_json::to_writer(&mut w, d).expect("documents serialize");
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads class names, one per line; line order is class index.
pub fn load_class_names(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let names: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if names.is_empty() {
        return Err(Error::parse(path, 1, "no class names"));
    }
    let unique: HashSet<_> = names.iter().collect();
    if unique.len() != names.len() {
        return Err(Error::parse(path, 1, "duplicate class names"));
    }
    Ok(names)
}

pub fn write_class_names(path: &Path, names: &[String]) -> Result<()> {
    let mut text = names.join("\n");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
