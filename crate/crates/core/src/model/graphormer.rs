//! Graph transformer over one ego subgraph.
//!
//! Parameter names (shapes with `B = max_degree_bucket`, `D = max_spd`,
//! `e = edge_feature_dim`, `d = d_model`, `f = d_ffn`, `H = num_heads`):
//!
//! | name | shape |
//! |---|---|
//! | `fusion.proj.<source>` | `d_source×d` |
//! | `fusion.score_transform`, `fusion.score_vector` | `d×d`, `d×1` |
//! | `centrality.in_degree`, `centrality.out_degree` | `(B+1)×d` |
//! | `spatial.bias` | `H×(D+2)`; column `D+1` is the unreachable bucket |
//! | `edge.weights` | `H×(D·e)`; entry `[h, n·e + f]` weights feature `f` of path edge `n+1` |
//! | `layers.<i>.attn_norm.{gain,bias}` | `d` |
//! | `layers.<i>.attn.{q,k,v,out}.weight` / `.bias` | `d×d` / `d` |
//! | `layers.<i>.ffn_norm.{gain,bias}` | `d` |
//! | `layers.<i>.ffn.up.weight` / `.bias` | `d×f` / `f` |
//! | `layers.<i>.ffn.down.weight` / `.bias` | `f×d` / `d` |
//! | `head.norm.{gain,bias}` | `d` |
//! | `head.linear.weight` / `.bias` | `d×C` / `C` |

use rand::Rng;

use super::{GraphormerConfig, SubgraphBatch};
use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::features::Source;
use crate::fusion::FusionLayer;

#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<R: Rng>(
        params: &mut ParamStore,
        rng: &mut R,
        name: &str,
        fan_in: usize,
        fan_out: usize,
    ) -> Self {
        let weight = params.add_normal(
            format!("{name}.weight"),
            &[fan_in, fan_out],
            1.0 / (fan_in as f64).sqrt(),
            rng,
        );
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(&[fan_out]));
        Self { weight, bias }
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(params, self.weight);
        let b = tape.param(params, self.bias);
        let y = tape.matmul(x, w)?;
        tape.bias_add(y, b)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Norm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl Norm {
    pub fn new(params: &mut ParamStore, name: &str, dim: usize) -> Self {
        Self {
            gain: params.add(format!("{name}.gain"), Tensor::full(&[dim], 1.0)),
            bias: params.add(format!("{name}.bias"), Tensor::zeros(&[dim])),
        }
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamStore, x: Var, eps: f64) -> Result<Var> {
        let g = tape.param(params, self.gain);
        let b = tape.param(params, self.bias);
        tape.layer_norm(x, g, b, eps)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct FeedForward {
    pub norm: Norm,
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new<R: Rng>(
        params: &mut ParamStore,
        rng: &mut R,
        prefix: &str,
        d: usize,
        f: usize,
    ) -> Self {
        Self {
            norm: Norm::new(params, &format!("{prefix}.ffn_norm"), d),
            up: Linear::new(params, rng, &format!("{prefix}.ffn.up"), d, f),
            down: Linear::new(params, rng, &format!("{prefix}.ffn.down"), f, d),
        }
    }

    /// `x + down(relu(up(norm(x))))`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        x: Var,
        eps: f64,
        dropout: &mut Dropout<'_>,
    ) -> Result<Var> {
        let a = self.norm.forward(tape, params, x, eps)?;
        let a = self.up.forward(tape, params, a)?;
        let a = tape.relu(a);
        let a = self.down.forward(tape, params, a)?;
        let a = dropout.apply(tape, a)?;
        tape.add(x, a)
    }
}

/// Classification head: layer norm followed by a linear map to class logits.
#[derive(Debug, Clone)]
pub(crate) struct Head {
    pub norm: Norm,
    pub linear: Linear,
}

impl Head {
    pub fn new<R: Rng>(params: &mut ParamStore, rng: &mut R, d: usize, classes: usize) -> Self {
        Self {
            norm: Norm::new(params, "head.norm", d),
            linear: Linear::new(params, rng, "head.linear", d, classes),
        }
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamStore, x: Var, eps: f64) -> Result<Var> {
        let a = self.norm.forward(tape, params, x, eps)?;
        self.linear.forward(tape, params, a)
    }
}

/// Inverted dropout; a no-op when `rate` is zero or no RNG is supplied.
pub struct Dropout<'r> {
    pub rate: f64,
    pub rng: Option<&'r mut dyn rand::RngCore>,
}

impl Dropout<'_> {
    pub fn disabled() -> Dropout<'static> {
        Dropout {
            rate: 0.0,
            rng: None,
        }
    }

    pub fn apply(&mut self, tape: &mut Tape, x: Var) -> Result<Var> {
        let Some(rng) = self.rng.as_deref_mut() else {
            return Ok(x);
        };
        if self.rate <= 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - self.rate;
        let shape = tape.value(x).shape().to_vec();
        let numel = tape.value(x).numel();
        let mask: Vec<f64> = (0..numel)
            .map(|_| {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        let m = tape.constant(Tensor::new(shape, mask)?);
        tape.mul(x, m)
    }
}

#[derive(Debug, Clone)]
struct AttentionBlock {
    attn_norm: Norm,
    q: Linear,
    k: Linear,
    v: Linear,
    out: Linear,
    ffn: FeedForward,
}

/// Values recorded during a forward pass.
pub struct ForwardOutput {
    /// `k×C` logits, one row per subgraph node.
    pub logits: Var,
    /// `[layer][head]` row-stochastic `k×k` attention matrices.
    pub attention: Vec<Vec<Var>>,
    /// `H` per-head `k×k` structural biases.
    pub bias: Vec<Var>,
    /// `k×d_model` input after centrality encoding.
    pub h0: Var,
}

#[derive(Debug, Clone)]
pub struct GraphormerModel {
    cfg: GraphormerConfig,
    pub(crate) fusion: FusionLayer,
    pub(crate) in_degree: ParamId,
    pub(crate) out_degree: ParamId,
    pub(crate) spatial: ParamId,
    pub(crate) edge_weights: ParamId,
    layers: Vec<AttentionBlock>,
    head: Head,
}

impl GraphormerModel {
    pub fn new<R: Rng>(
        cfg: &GraphormerConfig,
        params: &mut ParamStore,
        rng: &mut R,
        source_dims: &[(Source, usize)],
        active: &[Source],
    ) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_model;
        let fusion = FusionLayer::new(params, rng, source_dims, d, active)?;
        let in_degree = params.add_normal(
            "centrality.in_degree",
            &[cfg.max_degree_bucket + 1, d],
            0.02,
            rng,
        );
        let out_degree = params.add_normal(
            "centrality.out_degree",
            &[cfg.max_degree_bucket + 1, d],
            0.02,
            rng,
        );
        let spatial =
            params.add_normal("spatial.bias", &[cfg.num_heads, cfg.max_spd + 2], 0.02, rng);
        let edge_weights = params.add_normal(
            "edge.weights",
            &[cfg.num_heads, cfg.max_spd * cfg.edge_feature_dim],
            0.02,
            rng,
        );
        let layers = (0..cfg.num_layers)
            .map(|i| {
                let p = format!("layers.{i}");
                AttentionBlock {
                    attn_norm: Norm::new(params, &format!("{p}.attn_norm"), d),
                    q: Linear::new(params, rng, &format!("{p}.attn.q"), d, d),
                    k: Linear::new(params, rng, &format!("{p}.attn.k"), d, d),
                    v: Linear::new(params, rng, &format!("{p}.attn.v"), d, d),
                    out: Linear::new(params, rng, &format!("{p}.attn.out"), d, d),
                    ffn: FeedForward::new(params, rng, &p, d, cfg.d_ffn),
                }
            })
            .collect();
        let head = Head::new(params, rng, d, cfg.num_classes);
        Ok(Self {
            cfg: cfg.clone(),
            fusion,
            in_degree,
            out_degree,
            spatial,
            edge_weights,
            layers,
            head,
        })
    }

    pub fn config(&self) -> &GraphormerConfig {
        &self.cfg
    }

    pub fn fusion(&self) -> &FusionLayer {
        &self.fusion
    }

    /// Parameter ids of the structural tables: in-degree, out-degree,
    /// spatial bias, edge weights.
    pub fn structural_params(&self) -> [ParamId; 4] {
        [
            self.in_degree,
            self.out_degree,
            self.spatial,
            self.edge_weights,
        ]
    }

    /// `h0 = x + z_in[deg_in] + z_out[deg_out]` with degrees clipped to the
    /// last bucket.
    pub fn input_embedding(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        x: Var,
        in_deg: &[usize],
        out_deg: &[usize],
    ) -> Result<Var> {
        let zin_t = tape.param(params, self.in_degree);
        let zout_t = tape.param(params, self.out_degree);
        let in_idx: Vec<usize> = in_deg.iter().map(|&d| self.cfg.degree_bucket(d)).collect();
        let out_idx: Vec<usize> = out_deg.iter().map(|&d| self.cfg.degree_bucket(d)).collect();
        let zin = tape.embedding_lookup(zin_t, &in_idx)?;
        let zout = tape.embedding_lookup(zout_t, &out_idx)?;
        let h = tape.add(x, zin)?;
        tape.add(h, zout)
    }

    /// Per-head `k×k` bias `b[h][bucket(d_ij)] + c_ij[h]`.
    pub fn attention_bias(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        batch: &SubgraphBatch,
    ) -> Result<Vec<Var>> {
        let k = batch.len();
        let expected = self.cfg.max_spd * self.cfg.edge_feature_dim;
        if batch.edge_design.cols() != expected || batch.spd.cap() != self.cfg.max_spd {
            return Err(Error::shape(
                "attention_bias",
                format!(
                    "batch built with cap {} and {} edge columns, model expects cap {} and {expected}",
                    batch.spd.cap(),
                    batch.edge_design.cols(),
                    self.cfg.max_spd
                ),
            ));
        }
        let buckets: Vec<usize> = batch
            .spd
            .as_slice()
            .iter()
            .map(|&d| self.cfg.spd_bucket(d))
            .collect();
        let spatial = tape.param(params, self.spatial);
        let spatial_t = tape.transpose(spatial)?;
        let b = tape.embedding_lookup(spatial_t, &buckets)?;
        let w = tape.param(params, self.edge_weights);
        let w_t = tape.transpose(w)?;
        let design = tape.constant(batch.edge_design.clone());
        let c = tape.matmul(design, w_t)?;
        let all = tape.add(b, c)?;
        (0..self.cfg.num_heads)
            .map(|h| {
                let col = tape.slice_cols(all, h, 1)?;
                tape.reshape(col, &[k, k])
            })
            .collect()
    }

    fn attention(
        &self,
        block: &AttentionBlock,
        tape: &mut Tape,
        params: &ParamStore,
        x: Var,
        bias: &[Var],
    ) -> Result<(Var, Vec<Var>)> {
        let dh = self.cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let q = block.q.forward(tape, params, x)?;
        let k = block.k.forward(tape, params, x)?;
        let v = block.v.forward(tape, params, x)?;
        let mut heads = Vec::with_capacity(self.cfg.num_heads);
        let mut probs = Vec::with_capacity(self.cfg.num_heads);
        for (h, &bias_h) in bias.iter().enumerate() {
            let qh = tape.slice_cols(q, h * dh, dh)?;
            let kh = tape.slice_cols(k, h * dh, dh)?;
            let vh = tape.slice_cols(v, h * dh, dh)?;
            let kt = tape.transpose(kh)?;
            let scores = tape.matmul(qh, kt)?;
            let scores = tape.mul_scalar(scores, scale);
            let scores = tape.add(scores, bias_h)?;
            let p = tape.softmax(scores);
            heads.push(tape.matmul(p, vh)?);
            probs.push(p);
        }
        let joined = tape.concat(&heads, 1)?;
        Ok((block.out.forward(tape, params, joined)?, probs))
    }

    /// Multi-head attention of one block (without the residual or norm).
    pub fn multi_head_attention(
        &self,
        layer: usize,
        tape: &mut Tape,
        params: &ParamStore,
        x: Var,
        bias: &[Var],
    ) -> Result<(Var, Vec<Var>)> {
        self.attention(&self.layers[layer], tape, params, x, bias)
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        batch: &SubgraphBatch,
        inputs: &[(Source, Tensor)],
        dropout: &mut Dropout<'_>,
    ) -> Result<ForwardOutput> {
        let k = batch.len();
        let vars: Vec<(Source, Var)> = inputs
            .iter()
            .filter(|(s, _)| self.fusion.active().contains(s))
            .map(|(s, t)| (*s, tape.constant(t.clone())))
            .collect();
        if let Some((s, _)) = vars.iter().find(|(_, v)| tape.value(*v).rows() != k) {
            return Err(Error::shape(
                "forward",
                format!("source {s} rows differ from {k} subgraph nodes"),
            ));
        }
        let fused = self.fusion.forward(tape, params, &vars)?;
        let h0 = self.input_embedding(tape, params, fused.x, &batch.in_deg, &batch.out_deg)?;
        let bias = self.attention_bias(tape, params, batch)?;
        let eps = self.cfg.layer_norm_eps;
        let mut h = h0;
        let mut attention = Vec::with_capacity(self.layers.len());
        for block in &self.layers {
            let a = block.attn_norm.forward(tape, params, h, eps)?;
            let (a, probs) = self.attention(block, tape, params, a, &bias)?;
            let a = dropout.apply(tape, a)?;
            h = tape.add(h, a)?;
            h = block.ffn.forward(tape, params, h, eps, dropout)?;
            attention.push(probs);
        }
        let logits = self.head.forward(tape, params, h, eps)?;
        Ok(ForwardOutput {
            logits,
            attention,
            bias,
            h0,
        })
    }
}
