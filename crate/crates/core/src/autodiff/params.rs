use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named learnable tensors and their accumulated gradients, in registration
/// order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "parameter {name} registered twice"
        );
        let id = self.values.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.grads.push(Tensor::zeros(value.shape()));
        self.values.push(value);
        ParamId(id)
    }

    /// Registers a tensor drawn from N(0, std²).
    pub fn add_normal<R: Rng>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        std: f64,
        rng: &mut R,
    ) -> ParamId {
        let dist = Normal::new(0.0, std).expect("std must be finite and non-negative");
        let numel = shape.iter().product();
        let data = (0..numel).map(|_| dist.sample(rng)).collect();
        self.add(
            name,
            Tensor::new(shape.to_vec(), data).expect("shape matches"),
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.data_mut().fill(0.0);
        }
    }

    /// A store with the same names and zeroed gradients but empty values,
    /// used as a per-thread gradient sink for tapes recorded against `self`.
    pub fn grad_buffer(&self) -> ParamStore {
        ParamStore {
            names: self.names.clone(),
            values: self.values.iter().map(|_| Tensor::zeros(&[0])).collect(),
            grads: self
                .grads
                .iter()
                .map(|g| Tensor::zeros(g.shape()))
                .collect(),
            index: self.index.clone(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(Tensor::is_finite)
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    /// Multiplies every accumulated gradient by `factor`.
    pub fn scale_grads(&mut self, factor: f64) {
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// Adds `other`'s gradients into this store's. Both stores must hold the
    /// same parameters in the same order.
    pub fn merge_grads(&mut self, other: &ParamStore) -> Result<()> {
        if other.names != self.names {
            return Err(Error::InvalidInput(
                "cannot merge gradients of different parameter sets".into(),
            ));
        }
        for (g, o) in self.grads.iter_mut().zip(&other.grads) {
            for (a, b) in g.data_mut().iter_mut().zip(o.data()) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn grad_norms(&self) -> Vec<(&str, f64)> {
        self.names
            .iter()
            .zip(&self.grads)
            .map(|(n, g)| (n.as_str(), g.norm()))
            .collect()
    }

    pub fn named_values(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Overwrites values from `(name, tensor)` pairs. Every parameter must be
    /// present with an identical shape and no extra names are allowed.
    pub fn load_named(&mut self, entries: Vec<(String, Tensor)>) -> Result<()> {
        if entries.len() != self.values.len() {
            let have: Vec<&str> = entries.iter().map(|(n, _)| n.as_str()).collect();
            let missing: Vec<&str> = self
                .names
                .iter()
                .filter(|n| !have.contains(&n.as_str()))
                .map(String::as_str)
                .collect();
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, checkpoint has {} (missing: {missing:?})",
                self.values.len(),
                entries.len()
            )));
        }
        for (name, tensor) in entries {
            let Some(&id) = self.index.get(&name) else {
                return Err(Error::Checkpoint(format!("unknown parameter {name}")));
            };
            if self.values[id].shape() != tensor.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name}: model shape {:?}, checkpoint shape {:?}",
                    self.values[id].shape(),
                    tensor.shape()
                )));
            }
            self.values[id] = tensor;
        }
        Ok(())
    }
}
