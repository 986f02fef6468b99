//! Command-line entry points.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::data::ogb::load_ogb_dir;
use crate::data::synthetic::{generate, write_corpus, SyntheticParams};
use crate::data::{assemble, Dataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate, run_ablation, MetricsReport};
use crate::features::matrix::read_matrix;
use crate::features::{load_class_names, load_documents, load_llm_records, LlmCache};
use crate::graph::read_edge_list;
use crate::train::{split_by_year, write_history_csv, Partition, Trainer};

/// `println!` that stays quiet when stdout is a closed pipe.
macro_rules! emit {
    (raw $($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($arg)*);
    }};
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(
    name = "tagformer",
    version,
    about = "Graph-transformer node classification on text-attributed citation graphs"
)]
pub struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 1 gives bit-identical runs.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate inputs and write the prepared dataset artifact.
    Prepare(Common),
    /// Train and write checkpoint.bin, history.csv and val_metrics.json.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a checkpoint on one split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out_dir>/checkpoint.bin`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "val")]
        split: String,
    },
    /// Train and evaluate every ablation configuration.
    Ablate(Common),
    /// Write a synthetic benchmark corpus and its run.toml.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        text_signal: Option<f64>,
        #[arg(long)]
        homophily: Option<f64>,
        #[arg(long)]
        ogb_signal: Option<f64>,
        #[arg(long)]
        llm_coverage: Option<f64>,
        #[arg(long)]
        llm_knowledge: Option<f64>,
        /// How far back citations reach; 0 for no limit.
        #[arg(long)]
        citation_window: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print dataset statistics.
    Inspect(Common),
}

impl Common {
    fn load(&self, extra: &[String]) -> Result<RunConfig> {
        let mut overrides = self.set.clone();
        overrides.extend_from_slice(extra);
        if let Some(d) = &self.out_dir {
            overrides.push(format!("paths.out_dir={}", toml_str(d)));
        }
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        if let Some(t) = self.threads {
            overrides.push(format!("threads={t}"));
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

fn toml_str(p: &Path) -> String {
    toml::Value::String(p.display().to_string()).to_string()
}

fn need<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("paths.{key} is not set")))
}

/// Reads the raw inputs named in `cfg` and assembles a dataset.
pub fn build_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let p = &cfg.paths;
    let mut opts = cfg.bundle_options();
    if let Some(t) = &p.text_embeddings {
        opts.text_override = Some(read_matrix(t)?);
    }
    if let Some(t) = &p.expl_embeddings {
        opts.expl_override = Some(read_matrix(t)?);
    }
    let (docs, edges, features, mut class_names) = match &p.ogb_dir {
        Some(dir) => {
            let raw = load_ogb_dir(dir)?;
            (raw.docs, raw.edges, raw.features, raw.class_names)
        }
        None => {
            let docs = load_documents(need(&p.nodes, "nodes")?)?;
            let edges = read_edge_list(need(&p.edges, "edges")?)?;
            let features = read_matrix(need(&p.ogb_features, "ogb_features")?)?;
            (docs, edges, features, Vec::new())
        }
    };
    if let Some(c) = &p.classes {
        class_names = load_class_names(c)?;
    }
    if class_names.is_empty() {
        return Err(Error::Config("paths.classes is not set".into()));
    }
    let records = match &p.llm_cache {
        Some(path) => {
            let cache = load_llm_records(path, &class_names)?;
            if cache.unknown_class_names + cache.repeated_predictions > 0 {
                log::warn!(
                    "{}: dropped {} unknown class names and {} repeated predictions",
                    path.display(),
                    cache.unknown_class_names,
                    cache.repeated_predictions
                );
            }
            cache
        }
        None => LlmCache::default(),
    };
    log::info!(
        "{} nodes, {} edges, {} LLM records",
        docs.len(),
        edges.len(),
        records.len()
    );
    assemble(&docs, &edges, class_names, &records, features, &opts)
}

/// Loads the prepared dataset named by `cfg`.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let path = cfg.dataset_path();
    if !path.exists() {
        return Err(Error::InvalidInput(format!(
            "prepared dataset {} not found; run `tagformer prepare` first",
            path.display()
        )));
    }
    Dataset::load(path)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn labels_of(data: &Dataset, nodes: &[usize]) -> Vec<usize> {
    nodes
        .iter()
        .map(|&v| data.label(v).expect("split nodes are labeled"))
        .collect()
}

fn report(trainer: &Trainer<'_>, data: &Dataset, nodes: &[usize]) -> Result<MetricsReport> {
    let preds = trainer.predict(nodes)?;
    evaluate(&preds, &labels_of(data, nodes), data.num_classes())
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(f)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(common) => {
            let cfg = common.load(&[])?;
            with_threads(cfg.threads, || {
                let data = build_dataset(&cfg)?;
                cfg.write_resolved()?;
                let path = cfg.dataset_path();
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                }
                let hash = data.save(path)?;
                emit!("{}  {}", hash, path.display());
                Ok(())
            })
        }
        Command::Train { common, epochs } => {
            let extra: Vec<String> = epochs
                .map(|e| format!("train.epochs={e}"))
                .into_iter()
                .collect();
            let cfg = common.load(&extra)?;
            with_threads(cfg.threads, || {
                let data = load_dataset(&cfg)?;
                let split = split_by_year(&data.labels, &data.years, &cfg.split)?;
                cfg.write_resolved()?;
                let mut trainer = Trainer::new(
                    &data,
                    cfg.classifier,
                    &cfg.model,
                    &cfg.fusion.sources,
                    &cfg.train_config(),
                    cfg.sampling,
                )?;
                let outcome = trainer.train(&split)?;
                let out = cfg.out_dir();
                let ckpt = out.join("checkpoint.bin");
                std::fs::write(&ckpt, &outcome.best_checkpoint).map_err(|e| Error::io(&ckpt, e))?;
                write_history_csv(&out.join("history.csv"), &outcome.history)?;
                let val = report(&trainer, &data, &split.val)?;
                write_json(&out.join("val_metrics.json"), &val)?;
                emit!(
                    "best epoch {} of {}: val accuracy {:.4}, macro F1 {:.4}",
                    outcome.best_epoch,
                    outcome.history.len(),
                    val.accuracy,
                    val.macro_f1
                );
                Ok(())
            })
        }
        Command::Eval {
            common,
            checkpoint,
            split,
        } => {
            let partition: Partition = split.parse()?;
            let cfg = common.load(&[])?;
            with_threads(cfg.threads, || {
                let data = load_dataset(&cfg)?;
                let splits = split_by_year(&data.labels, &data.years, &cfg.split)?;
                cfg.write_resolved()?;
                let mut trainer = Trainer::new(
                    &data,
                    cfg.classifier,
                    &cfg.model,
                    &cfg.fusion.sources,
                    &cfg.train_config(),
                    cfg.sampling,
                )?;
                let ckpt = checkpoint.unwrap_or_else(|| cfg.out_dir().join("checkpoint.bin"));
                let bytes = std::fs::read(&ckpt).map_err(|e| Error::io(&ckpt, e))?;
                trainer
                    .params_mut()
                    .load_checkpoint(&bytes)
                    .map_err(|e| Error::Checkpoint(format!("{}: {e}", ckpt.display())))?;
                let m = report(&trainer, &data, splits.get(partition))?;
                let path = cfg.out_dir().join(format!("{split}_metrics.json"));
                write_json(&path, &m)?;
                emit!(
                    "{}",
                    serde_json::to_string_pretty(&m).expect("serializable")
                );
                Ok(())
            })
        }
        Command::Ablate(common) => {
            let cfg = common.load(&[])?;
            with_threads(cfg.threads, || {
                let data = load_dataset(&cfg)?;
                let split = split_by_year(&data.labels, &data.years, &cfg.split)?;
                cfg.write_resolved()?;
                let table = run_ablation(
                    &data,
                    &split,
                    &cfg.model,
                    &cfg.train_config(),
                    cfg.sampling,
                    &cfg.ablation,
                    Partition::Test,
                )?;
                let out = cfg.out_dir();
                let text = table.render();
                std::fs::write(out.join("ablation.txt"), &text)
                    .map_err(|e| Error::io(out.join("ablation.txt"), e))?;
                write_json(&out.join("ablation.json"), &table)?;
                emit!(raw "{text}");
                Ok(())
            })
        }
        Command::GenSynthetic {
            out,
            nodes,
            classes,
            text_signal,
            homophily,
            ogb_signal,
            llm_coverage,
            llm_knowledge,
            citation_window,
            seed,
        } => {
            let mut p = SyntheticParams::default();
            p.num_nodes = nodes.unwrap_or(p.num_nodes);
            p.num_classes = classes.unwrap_or(p.num_classes);
            p.text_signal = text_signal.unwrap_or(p.text_signal);
            p.homophily = homophily.unwrap_or(p.homophily);
            p.ogb_signal = ogb_signal.unwrap_or(p.ogb_signal);
            p.llm_coverage = llm_coverage.unwrap_or(p.llm_coverage);
            p.llm_knowledge = llm_knowledge.unwrap_or(p.llm_knowledge);
            p.citation_window = citation_window.unwrap_or(p.citation_window);
            p.seed = seed.unwrap_or(p.seed);
            let corpus = generate(&p)?;
            write_corpus(&out, &corpus)?;
            emit!(
                "wrote {} nodes, {} edges, {} LLM records to {}",
                corpus.docs.len(),
                corpus.edges.len(),
                corpus.records.len(),
                out.display()
            );
            Ok(())
        }
        Command::Inspect(common) => {
            let cfg = common.load(&[])?;
            let data = load_dataset(&cfg)?;
            emit!(raw "{}", describe(&data, &cfg)?);
            Ok(())
        }
    }
}

/// Human-readable dataset summary.
pub fn describe(data: &Dataset, cfg: &RunConfig) -> Result<String> {
    use std::fmt::Write as _;
    let split = split_by_year(&data.labels, &data.years, &cfg.split)?;
    let mut out = String::new();
    let g = &data.graph;
    writeln!(out, "nodes: {}", g.num_nodes()).unwrap();
    writeln!(out, "edges: {}", g.num_edges()).unwrap();
    writeln!(out, "classes: {}", data.num_classes()).unwrap();
    writeln!(
        out,
        "split: train {} / val {} / test {}",
        split.train.len(),
        split.val.len(),
        split.test.len()
    )
    .unwrap();
    writeln!(out, "hash: {}", data.content_hash()).unwrap();
    let width = data
        .class_names
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(5)
        .max(5);
    writeln!(
        out,
        "{:<width$}  {:>7}  {:>7}  {:>7}",
        "class", "train", "val", "test"
    )
    .unwrap();
    for (c, name) in data.class_names.iter().enumerate() {
        let count = |nodes: &[usize]| nodes.iter().filter(|&&v| data.label(v) == Some(c)).count();
        writeln!(
            out,
            "{:<width$}  {:>7}  {:>7}  {:>7}",
            name,
            count(&split.train),
            count(&split.val),
            count(&split.test)
        )
        .unwrap();
    }
    Ok(out)
}

/// Parses `args`, runs the command and maps the outcome to an exit code:
/// 0 success, 1 runtime failure, 2 invalid input or configuration.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_invalid_input() {
                2
            } else {
                1
            }
        }
    }
}
