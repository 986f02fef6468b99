//! Learned attention over the embedding sources.
//!
//! Every source is projected to `d_model`; each projection `u_s` gets a score
//! `w · tanh(W u_s)` and the node input is the softmax-weighted sum of the
//! projections over the active sources.

use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::features::Source;

#[derive(Debug, Clone)]
pub struct FusionLayer {
    d_model: usize,
    projections: Vec<(Source, usize, ParamId)>,
    score_transform: ParamId,
    score_vector: ParamId,
    active: Vec<Source>,
}

pub struct FusionOutput {
    /// `k×d_model` fused node inputs.
    pub x: Var,
    /// `k×S` attention weights, columns in [`FusionLayer::active`] order.
    pub weights: Var,
}

impl FusionLayer {
    /// Registers one projection per entry of `source_dims`; only `active`
    /// sources take part in the mixture.
    pub fn new<R: Rng>(
        params: &mut ParamStore,
        rng: &mut R,
        source_dims: &[(Source, usize)],
        d_model: usize,
        active: &[Source],
    ) -> Result<Self> {
        let mut active: Vec<Source> = active.to_vec();
        active.sort();
        active.dedup();
        if active.is_empty() {
            return Err(Error::Config(
                "fusion needs at least one active source".into(),
            ));
        }
        if let Some(s) = active
            .iter()
            .find(|s| !source_dims.iter().any(|(d, _)| d == *s))
        {
            return Err(Error::Config(format!(
                "active source {s} has no input dimension"
            )));
        }
        let mut dims = source_dims.to_vec();
        dims.sort();
        let projections = dims
            .into_iter()
            .map(|(s, dim)| {
                let std = 1.0 / (dim.max(1) as f64).sqrt();
                let id = params.add_normal(format!("fusion.proj.{s}"), &[dim, d_model], std, rng);
                (s, dim, id)
            })
            .collect();
        let std = 1.0 / (d_model as f64).sqrt();
        let score_transform =
            params.add_normal("fusion.score_transform", &[d_model, d_model], std, rng);
        let score_vector = params.add_normal("fusion.score_vector", &[d_model, 1], std, rng);
        Ok(Self {
            d_model,
            projections,
            score_transform,
            score_vector,
            active,
        })
    }

    pub fn active(&self) -> &[Source] {
        &self.active
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    pub fn input_dim(&self, s: Source) -> Option<usize> {
        self.projections
            .iter()
            .find(|(p, _, _)| *p == s)
            .map(|&(_, d, _)| d)
    }

    /// Fuses `k` rows of each active source. `inputs` must contain every
    /// active source; other entries are ignored.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        inputs: &[(Source, Var)],
    ) -> Result<FusionOutput> {
        let w = tape.param(params, self.score_transform);
        let v = tape.param(params, self.score_vector);
        let mut projected = Vec::with_capacity(self.active.len());
        let mut scores = Vec::with_capacity(self.active.len());
        for &s in &self.active {
            let &(_, dim, pid) = self
                .projections
                .iter()
                .find(|(p, _, _)| *p == s)
                .expect("active sources have projections");
            let h = inputs
                .iter()
                .find(|(src, _)| *src == s)
                .map(|&(_, var)| var)
                .ok_or_else(|| Error::InvalidInput(format!("missing input for source {s}")))?;
            if tape.value(h).cols() != dim {
                return Err(Error::shape(
                    "fuse",
                    format!(
                        "source {s} has {} columns, projection expects {dim}",
                        tape.value(h).cols()
                    ),
                ));
            }
            let p = tape.param(params, pid);
            let u = tape.matmul(h, p)?;
            let t = tape.matmul(u, w)?;
            let t = tape.tanh(t);
            scores.push(tape.matmul(t, v)?);
            projected.push(u);
        }
        let scores = tape.concat(&scores, 1)?;
        let weights = tape.softmax(scores);
        let ones = tape.constant(Tensor::full(&[1, self.d_model], 1.0));
        let mut x: Option<Var> = None;
        for (i, &u) in projected.iter().enumerate() {
            let a = tape.slice_cols(weights, i, 1)?;
            let a = tape.matmul(a, ones)?;
            let term = tape.mul(a, u)?;
            x = Some(match x {
                Some(acc) => tape.add(acc, term)?,
                None => term,
            });
        }
        Ok(FusionOutput {
            x: x.expect("at least one active source"),
            weights,
        })
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn rejects_empty_mask() {
        let mut p = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = FusionLayer::new(&mut p, &mut rng, &[(Source::Text, 4)], 8, &[]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn single_source_weight_is_one() {
        let mut p = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = FusionLayer::new(
            &mut p,
            &mut rng,
            &[(Source::Text, 3), (Source::Ogb, 2)],
            4,
            &[Source::Ogb],
        )
        .unwrap();
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::matrix(2, 2, vec![0.5, -1.0, 2.0, 0.25]).unwrap());
        let out = layer.forward(&mut tape, &p, &[(Source::Ogb, h)]).unwrap();
        assert_eq!(tape.value(out.weights).data(), &[1.0, 1.0]);
        let proj = tape.param(&p, p.id("fusion.proj.ogb").unwrap());
        let direct = tape.matmul(h, proj).unwrap();
        assert_eq!(tape.value(out.x), tape.value(direct));
    }
}
