//! Prompt construction, the cached-LLM-output format, and an offline stub
//! that stands in for the hosted model.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::documents::NodeDocument;
use super::encode::tokenize;
use crate::error::{Error, Result};

/// An LLM's answer for one node: ranked class indices plus free-text reasoning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmRecord {
    pub id: usize,
    pub predictions: Vec<usize>,
    pub explanation: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: usize,
    predictions: Vec<String>,
    #[serde(default)]
    explanation: String,
}

/// Parsed LLM cache plus counters for what was dropped while reading it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LlmCache {
    pub records: BTreeMap<usize, LlmRecord>,
    pub unknown_class_names: usize,
    pub repeated_predictions: usize,
}

impl LlmCache {
    pub fn get(&self, id: usize) -> Option<&LlmRecord> {
        self.records.get(&id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn from_records(records: impl IntoIterator<Item = LlmRecord>) -> Self {
        Self {
            records: records.into_iter().map(|r| (r.id, r)).collect(),
            ..Self::default()
        }
    }
}

/// Reads the JSONL cache `{"id", "predictions": [class names], "explanation"}`.
/// Class names outside `class_names` are dropped and counted.
pub fn load_llm_records(path: &Path, class_names: &[String]) -> Result<LlmCache> {
    let lookup: HashMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut cache = LlmCache::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        let mut predictions = Vec::with_capacity(raw.predictions.len());
        for name in &raw.predictions {
            match lookup.get(name.as_str()) {
                Some(&c) if predictions.contains(&c) => cache.repeated_predictions += 1,
                Some(&c) => predictions.push(c),
                None => cache.unknown_class_names += 1,
            }
        }
        if cache.records.contains_key(&raw.id) {
            return Err(Error::parse(
                path,
                i + 1,
                format!("duplicate node id {}", raw.id),
            ));
        }
        cache.records.insert(
            raw.id,
            LlmRecord {
                id: raw.id,
                predictions,
                explanation: raw.explanation,
            },
        );
    }
    if cache.unknown_class_names > 0 {
        log::warn!(
            "{}: dropped {} predictions naming unknown classes",
            path.display(),
            cache.unknown_class_names
        );
    }
    Ok(cache)
}

pub fn write_llm_records<'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a LlmRecord>,
    class_names: &[String],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let raw = RawRecord {
            id: r.id,
            predictions: r
                .predictions
                .iter()
                .map(|&c| class_names[c].clone())
                .collect(),
            explanation: r.explanation.clone(),
        };
        serde_json::to_writer(&mut w, &raw).expect("records serialize");
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const PROMPT_TEMPLATE: &str = "\
Title: {title}
Abstract: {abstract}

Candidate categories:
{categories}

Question: Which of the candidate categories does this paper belong to? \
Give your answer as a ranked list of the most likely categories, most likely first, \
and then explain your reasoning.
Answer format:
Predictions: <category>, <category>, ...
Explanation: <one paragraph>
";

pub const PROMPT_PLACEHOLDERS: [&str; 3] = ["{title}", "{abstract}", "{categories}"];

/// Renders the classification prompt for one paper. Placeholders are
/// substituted in a single left-to-right pass, so placeholder-like text
/// inside a title or abstract is never expanded.
pub fn format_prompt(doc: &NodeDocument, class_names: &[String]) -> String {
    let categories = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| format!("{}. {n}", i + 1))
        .collect::<Vec<_>>()
        .join("\n");
    let mut out = String::with_capacity(PROMPT_TEMPLATE.len() + doc.abstract_text.len() + 256);
    let mut rest = PROMPT_TEMPLATE;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        let (value, len) = if tail.starts_with("{title}") {
            (doc.title.as_str(), "{title}".len())
        } else if tail.starts_with("{abstract}") {
            (doc.abstract_text.as_str(), "{abstract}".len())
        } else if tail.starts_with("{categories}") {
            (categories.as_str(), "{categories}".len())
        } else {
            ("{", 1)
        };
        out.push_str(value);
        rest = &tail[len..];
    }
    out.push_str(rest);
    out
}

const EXPLANATION_OPENERS: [&str; 3] = [
    "The paper mentions",
    "Key terms in the text include",
    "The abstract discusses",
];

/// Offline substitute for the hosted LLM. Classes are ranked by how often
/// the tokens of their name occur in the title and abstract, ties by class
/// index; the top `top_k` are returned. The explanation lists the matching
/// tokens, and the seed only selects its phrasing.
pub fn stub_llm_provider(
    doc: &NodeDocument,
    class_names: &[String],
    top_k: usize,
    seed: u64,
) -> LlmRecord {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for tok in tokenize(&doc.full_text()) {
        *counts.entry(tok).or_default() += 1;
    }
    let class_tokens: Vec<Vec<String>> = class_names
        .iter()
        .map(|n| {
            let mut t: Vec<String> = tokenize(n).collect();
            t.dedup();
            t
        })
        .collect();
    let mut scored: Vec<(usize, usize)> = class_tokens
        .iter()
        .enumerate()
        .map(|(c, toks)| {
            (
                c,
                toks.iter()
                    .map(|t| counts.get(t).copied().unwrap_or(0))
                    .sum(),
            )
        })
        .collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let predictions: Vec<usize> = scored.iter().take(top_k).map(|&(c, _)| c).collect();

    let mut matched: Vec<(&str, usize)> = Vec::new();
    for &(c, score) in scored.iter().take(top_k) {
        if score == 0 {
            break;
        }
        for t in &class_tokens[c] {
            if let Some(&n) = counts.get(t) {
                if !matched.iter().any(|(m, _)| m == t) {
                    matched.push((t.as_str(), n));
                }
            }
        }
    }
    matched.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    matched.truncate(3);

    let explanation = if matched.is_empty() {
        "No category-specific terminology was found, so the ranking falls back to the \
         order of the candidate list."
            .to_string()
    } else {
        let opener = EXPLANATION_OPENERS[(seed % EXPLANATION_OPENERS.len() as u64) as usize];
        let terms: Vec<&str> = matched.iter().map(|(t, _)| *t).collect();
        format!(
            "{opener} {}, which point to {} as the most likely category.",
            terms.join(", "),
            class_names[predictions[0]]
        )
    };

    LlmRecord {
        id: doc.id,
        predictions,
        explanation,
    }
}
