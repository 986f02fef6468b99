//! Run configuration: one TOML file plus `key=value` overrides.
//!
//! Relative paths are resolved against the config file's directory (or the
//! working directory without a file). The output directory defaults to
//! `$TAGFORMER_OUT_DIR`, then `runs`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::AblationConfig;
use crate::features::{BundleOptions, Source};
use crate::model::{GraphormerConfig, ModelKind};
use crate::train::{SamplingConfig, SplitBoundaries, TrainConfig};

pub const OUT_DIR_ENV: &str = "TAGFORMER_OUT_DIR";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Node documents (JSONL).
    pub nodes: Option<PathBuf>,
    /// `src<TAB>dst` edge list.
    pub edges: Option<PathBuf>,
    pub ogb_features: Option<PathBuf>,
    pub llm_cache: Option<PathBuf>,
    /// Class names, one per line.
    pub classes: Option<PathBuf>,
    /// Raw ogbn-arxiv directory; replaces nodes, edges and ogb_features.
    pub ogb_dir: Option<PathBuf>,
    /// Precomputed replacements for the hashed text and explanation encoders.
    pub text_embeddings: Option<PathBuf>,
    pub expl_embeddings: Option<PathBuf>,
    /// Prepared artifact; defaults to `<out_dir>/dataset.bin`.
    pub dataset: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub text_dim: usize,
    pub top_k: usize,
    pub encoder_seed: u64,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        let b = BundleOptions::default();
        Self {
            text_dim: b.text_dim,
            top_k: b.top_k,
            encoder_seed: b.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub sources: Vec<Source>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            sources: Source::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub classifier: ModelKind,
    pub paths: PathsConfig,
    pub features: FeaturesConfig,
    pub fusion: FusionConfig,
    pub model: GraphormerConfig,
    pub sampling: SamplingConfig,
    pub train: TrainConfig,
    pub split: SplitBoundaries,
    pub ablation: AblationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            classifier: ModelKind::Graphormer,
            paths: PathsConfig::default(),
            features: FeaturesConfig::default(),
            fusion: FusionConfig::default(),
            model: GraphormerConfig::default(),
            sampling: SamplingConfig::default(),
            train: TrainConfig::default(),
            split: SplitBoundaries::default(),
            ablation: AblationConfig::default(),
        }
    }
}

fn set_key(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not KEY=VALUE")))?;
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        cur = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {part} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Reads `file` (if any), applies `overrides` in order and resolves paths.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let (mut table, base) = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let table: toml::Table = toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                (table, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (toml::Table::new(), PathBuf::new()),
        };
        for o in overrides {
            set_key(&mut table, o)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        let fix = |x: &mut Option<PathBuf>| {
            if let Some(path) = x {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        for x in [
            &mut p.nodes,
            &mut p.edges,
            &mut p.ogb_features,
            &mut p.llm_cache,
            &mut p.classes,
            &mut p.ogb_dir,
            &mut p.text_embeddings,
            &mut p.expl_embeddings,
            &mut p.dataset,
            &mut p.out_dir,
        ] {
            fix(x);
        }
        if p.out_dir.is_none() {
            p.out_dir = Some(match std::env::var_os(OUT_DIR_ENV) {
                Some(d) => PathBuf::from(d),
                None => base.join("runs"),
            });
        }
        if p.dataset.is_none() {
            p.dataset = Some(p.out_dir.as_ref().expect("set above").join("dataset.bin"));
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut model = self.model.clone();
        if model.num_classes == 0 {
            model.num_classes = 2;
        }
        model.validate()?;
        self.train.validate()?;
        self.sampling.validate()?;
        if self.fusion.sources.is_empty() {
            return Err(Error::Config(
                "fusion.sources must name at least one source".into(),
            ));
        }
        if self.features.text_dim == 0 || self.features.top_k == 0 {
            return Err(Error::Config(
                "features.text_dim and features.top_k must be positive".into(),
            ));
        }
        for name in &self.ablation.configurations {
            self.ablation.parse(name)?;
        }
        Ok(())
    }

    pub fn out_dir(&self) -> &Path {
        self.paths.out_dir.as_deref().expect("resolved on load")
    }

    pub fn dataset_path(&self) -> &Path {
        self.paths.dataset.as_deref().expect("resolved on load")
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn bundle_options(&self) -> BundleOptions {
        BundleOptions {
            text_dim: self.features.text_dim,
            top_k: self.features.top_k,
            seed: self.features.encoder_seed,
            text_override: None,
            expl_override: None,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Writes `config.resolved.toml` into the output directory.
    pub fn write_resolved(&self) -> Result<PathBuf> {
        let dir = self.out_dir();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("config.resolved.toml");
        std::fs::write(&path, self.to_toml()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
