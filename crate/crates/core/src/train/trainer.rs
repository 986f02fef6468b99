use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::schedule::{lr_at, EarlyStopping, Verdict};
use super::split::TemporalSplit;
use crate::autodiff::{ParamStore, Tape};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::features::Source;
use crate::graph::{DirectedGraph, EgoSubgraph};
use crate::model::{Classifier, Dropout, GraphormerConfig, ModelKind, SubgraphBatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub base_lr: f64,
    /// Defaults to one epoch of optimizer steps.
    pub warmup_steps: Option<usize>,
    pub label_smoothing: f64,
    pub grad_accum_steps: usize,
    /// Ego subgraphs per micro-batch.
    pub batch_size: usize,
    pub early_stop_patience: usize,
    /// Set from the run's top-level seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            base_lr: 0.002,
            warmup_steps: None,
            label_smoothing: 0.1,
            grad_accum_steps: 1,
            batch_size: 32,
            early_stop_patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Config(format!(
                "label_smoothing {} outside [0, 1)",
                self.label_smoothing
            )));
        }
        if self.early_stop_patience == 0 || self.grad_accum_steps == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "early_stop_patience, grad_accum_steps and batch_size must be at least 1".into(),
            ));
        }
        if !(self.base_lr.is_finite() && self.base_lr >= 0.0) {
            return Err(Error::Config(format!(
                "base_lr {} must be finite and non-negative",
                self.base_lr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub hops: usize,
    pub max_nodes: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            hops: 2,
            max_nodes: 24,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hops == 0 || self.max_nodes == 0 {
            return Err(Error::Config(
                "sampling hops and max_nodes must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builds and caches one subgraph batch per center. Each center's sample is
/// seeded from `(seed, center)`, so it is the same in every epoch and
/// independent of the order in which centers are requested.
pub struct BatchBuilder<'g> {
    graph: &'g DirectedGraph,
    sampling: SamplingConfig,
    max_spd: usize,
    seed: u64,
    structural: bool,
    cache: Mutex<HashMap<usize, Arc<SubgraphBatch>>>,
}

impl<'g> BatchBuilder<'g> {
    pub fn new(
        graph: &'g DirectedGraph,
        sampling: SamplingConfig,
        max_spd: usize,
        seed: u64,
        structural: bool,
    ) -> Self {
        Self {
            graph,
            sampling,
            max_spd,
            seed,
            structural,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn build(&self, center: usize) -> SubgraphBatch {
        let sub = if self.structural {
            self.graph.sample_ego_subgraph(
                center,
                self.sampling.hops,
                self.sampling.max_nodes,
                mix_seed(self.seed, center as u64),
            )
        } else {
            EgoSubgraph::from_parts(vec![center], Vec::new())
        };
        SubgraphBatch::build(self.graph, &sub, self.max_spd)
    }

    /// Batches for `centers`, building missing ones in parallel.
    pub fn get(&self, centers: &[usize]) -> Vec<Arc<SubgraphBatch>> {
        let missing: Vec<usize> = {
            let cache = self.cache.lock().expect("batch cache poisoned");
            let mut m: Vec<usize> = centers
                .iter()
                .copied()
                .filter(|c| !cache.contains_key(c))
                .collect();
            m.sort_unstable();
            m.dedup();
            m
        };
        if !missing.is_empty() {
            let built: Vec<(usize, Arc<SubgraphBatch>)> = missing
                .par_iter()
                .map(|&c| (c, Arc::new(self.build(c))))
                .collect();
            self.cache
                .lock()
                .expect("batch cache poisoned")
                .extend(built);
        }
        let cache = self.cache.lock().expect("batch cache poisoned");
        centers.iter().map(|c| Arc::clone(&cache[c])).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub step: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub lr: f64,
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from("epoch,step,train_loss,val_accuracy,lr\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.step, r.train_loss, r.val_accuracy, r.lr
        )
        .unwrap();
    }
    out
}

pub fn write_history_csv(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    std::fs::write(path, history_csv(rows)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<HistoryRow>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    /// Checkpoint bytes of the best epoch.
    pub best_checkpoint: Vec<u8>,
    pub stopped_early: bool,
}

/// Owns a classifier, its parameters and optimizer state for one dataset.
pub struct Trainer<'d> {
    data: &'d Dataset,
    model: Classifier,
    params: ParamStore,
    adam: Adam,
    cfg: TrainConfig,
    batches: BatchBuilder<'d>,
    updates: usize,
    warmup: usize,
    total_steps: usize,
}

impl<'d> Trainer<'d> {
    /// Fresh parameters drawn from `cfg.seed`. `model_cfg.num_classes` is
    /// taken from the dataset when zero.
    pub fn new(
        data: &'d Dataset,
        kind: ModelKind,
        model_cfg: &GraphormerConfig,
        sources: &[Source],
        cfg: &TrainConfig,
        sampling: SamplingConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        sampling.validate()?;
        let mut model_cfg = model_cfg.clone();
        if model_cfg.num_classes == 0 {
            model_cfg.num_classes = data.num_classes();
        }
        if model_cfg.num_classes != data.num_classes() {
            return Err(Error::Config(format!(
                "model has {} classes, dataset has {}",
                model_cfg.num_classes,
                data.num_classes()
            )));
        }
        let mut params = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let model = Classifier::new(
            kind,
            &model_cfg,
            &mut params,
            &mut rng,
            &data.bundle,
            sources,
        )?;
        let adam = Adam::new(&params, AdamConfig::default());
        let batches = BatchBuilder::new(
            &data.graph,
            sampling,
            model_cfg.max_spd,
            cfg.seed,
            model.uses_structure(),
        );
        Ok(Self {
            data,
            model,
            params,
            adam,
            cfg: cfg.clone(),
            batches,
            updates: 0,
            warmup: 0,
            total_steps: 0,
        })
    }

    /// Gives up the optimizer state, keeping the model and its parameters.
    pub fn into_parts(self) -> (Classifier, ParamStore) {
        (self.model, self.params)
    }

    pub fn model(&self) -> &Classifier {
        &self.model
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn batches(&self) -> &BatchBuilder<'d> {
        &self.batches
    }

    /// Optimizer updates applied so far.
    pub fn updates(&self) -> usize {
        self.updates
    }

    fn check_labels(&self, centers: &[usize]) -> Result<Vec<usize>> {
        centers
            .iter()
            .map(|&c| {
                self.data
                    .label(c)
                    .ok_or_else(|| Error::InvalidInput(format!("node {c} has no label")))
            })
            .collect()
    }

    /// Accumulates into the store the gradient of `scale * sum(loss_i)` over
    /// `centers`, returning the unscaled loss sum.
    fn accumulate(&mut self, centers: &[usize], scale: f64) -> Result<f64> {
        let labels = self.check_labels(centers)?;
        let batches = self.batches.get(centers);
        let eps = self.cfg.label_smoothing;
        let dropout_rate = self.model_config().dropout;
        let seed = mix_seed(self.cfg.seed, self.updates as u64);
        let (model, params, data) = (&self.model, &self.params, self.data);
        let results: Vec<Result<(f64, ParamStore)>> = batches
            .par_iter()
            .zip(&labels)
            .map(|(batch, &label)| {
                let mut tape = Tape::new();
                let mut rng =
                    ChaCha8Rng::seed_from_u64(mix_seed(seed, batch.nodes[batch.center] as u64));
                let mut dropout = Dropout {
                    rate: dropout_rate,
                    rng: Some(&mut rng),
                };
                let logits =
                    model.center_logits(&mut tape, params, batch, &data.bundle, &mut dropout)?;
                let loss = tape.smoothed_cross_entropy(logits, &[label], eps)?;
                let value = tape.value(loss).item();
                let scaled = tape.mul_scalar(loss, scale);
                let mut grads = params.grad_buffer();
                tape.backward(scaled, &mut grads)?;
                Ok((value, grads))
            })
            .collect();
        let mut total = 0.0;
        for r in results {
            let (loss, grads) = r?;
            total += loss;
            self.params.merge_grads(&grads)?;
        }
        Ok(total)
    }

    fn model_config(&self) -> &GraphormerConfig {
        match &self.model {
            Classifier::Graphormer(m) => m.config(),
            Classifier::NodeMlp(m) => m.config(),
        }
    }

    /// One optimizer update over `centers`, split into `grad_accum_steps`
    /// consecutive micro-batches of at most `batch_size` centers. Each
    /// micro-batch loss is a mean over its centers scaled by
    /// `1 / grad_accum_steps`. Returns the mean loss over all centers.
    pub fn step(&mut self, centers: &[usize], lr: f64) -> Result<f64> {
        if centers.is_empty() {
            return Err(Error::InvalidInput(
                "optimizer step over an empty batch".into(),
            ));
        }
        if !self.params.all_finite() {
            return Err(self.non_finite(lr));
        }
        self.params.zero_grad();
        let accum = self.cfg.grad_accum_steps;
        let micro = centers.len().div_ceil(accum);
        let chunks: Vec<&[usize]> = centers.chunks(micro).collect();
        let mut total = 0.0;
        for chunk in &chunks {
            total += self.accumulate(chunk, 1.0 / (chunk.len() * accum) as f64)?;
        }
        let mean = total / centers.len() as f64;
        if !mean.is_finite() {
            return Err(self.non_finite(lr));
        }
        self.adam.step(&mut self.params, lr);
        self.updates += 1;
        Ok(mean)
    }

    fn non_finite(&self, lr: f64) -> Error {
        let mut norms = self.params.grad_norms();
        norms.sort_by(|a, b| b.1.total_cmp(&a.1));
        let grad_norms = norms
            .iter()
            .take(5)
            .map(|(n, g)| format!("{n}={g:.3e}"))
            .collect::<Vec<_>>()
            .join(", ");
        Error::NonFiniteLoss {
            step: self.updates + 1,
            lr,
            grad_norms,
        }
    }

    /// Predicted class per node.
    pub fn predict(&self, nodes: &[usize]) -> Result<Vec<usize>> {
        predict_with(&self.model, &self.params, self.data, &self.batches, nodes)
    }

    pub fn accuracy(&self, nodes: &[usize]) -> Result<f64> {
        let preds = self.predict(nodes)?;
        let labels = self.check_labels(nodes)?;
        let correct = preds.iter().zip(&labels).filter(|(p, l)| p == l).count();
        Ok(correct as f64 / nodes.len().max(1) as f64)
    }

    pub fn steps_per_epoch(&self, num_train: usize) -> usize {
        num_train.div_ceil(self.cfg.batch_size * self.cfg.grad_accum_steps)
    }

    /// Full training run with per-epoch validation and early stopping. On
    /// return the store holds the best epoch's parameters.
    pub fn train(&mut self, split: &TemporalSplit) -> Result<TrainOutcome> {
        let per_step = self.cfg.batch_size * self.cfg.grad_accum_steps;
        let steps_per_epoch = self.steps_per_epoch(split.train.len());
        self.total_steps = steps_per_epoch * self.cfg.epochs;
        self.warmup = self
            .cfg
            .warmup_steps
            .unwrap_or(steps_per_epoch)
            .min(self.total_steps);
        let mut order = split.train.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.cfg.seed, 0x5eed));
        let mut stopper = EarlyStopping::new(self.cfg.early_stop_patience);
        let mut history = Vec::new();
        let mut best_checkpoint = self.params.to_checkpoint();
        let mut stopped_early = false;

        for epoch in 1..=self.cfg.epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            let mut lr = 0.0;
            for chunk in order.chunks(per_step) {
                lr = lr_at(
                    self.updates + 1,
                    self.cfg.base_lr,
                    self.warmup,
                    self.total_steps,
                );
                loss_sum += self.step(chunk, lr)? * chunk.len() as f64;
            }
            let train_loss = loss_sum / order.len() as f64;
            let val_accuracy = self.accuracy(&split.val)?;
            log::info!("epoch {epoch}: train loss {train_loss:.4}, val accuracy {val_accuracy:.4}");
            history.push(HistoryRow {
                epoch,
                step: self.updates,
                train_loss,
                val_accuracy,
                lr,
            });
            match stopper.observe(epoch, val_accuracy) {
                Verdict::Improved => best_checkpoint = self.params.to_checkpoint(),
                Verdict::Continue => {}
                Verdict::Stop => {
                    stopped_early = epoch < self.cfg.epochs;
                    break;
                }
            }
        }
        self.params.load_checkpoint(&best_checkpoint)?;
        let (best_epoch, best_val_accuracy) = stopper.best().expect("at least one epoch ran");
        Ok(TrainOutcome {
            history,
            best_epoch,
            best_val_accuracy,
            best_checkpoint,
            stopped_early,
        })
    }
}

/// Center-node predictions of `model` for `nodes`.
pub fn predict_with(
    model: &Classifier,
    params: &ParamStore,
    data: &Dataset,
    batches: &BatchBuilder<'_>,
    nodes: &[usize],
) -> Result<Vec<usize>> {
    let built = batches.get(nodes);
    built
        .par_iter()
        .map(|batch| {
            let mut tape = Tape::new();
            let logits = model.center_logits(
                &mut tape,
                params,
                batch,
                &data.bundle,
                &mut Dropout::disabled(),
            )?;
            Ok(tape.value(logits).argmax_rows()[0])
        })
        .collect()
}
