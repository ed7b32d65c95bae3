//! Named parameter storage and its binary blob format.
//!
//! Parameters are kept in registration order. The blob is every parameter's
//! data, concatenated in that order, as little-endian `f32`. The tensor table
//! (`name`, `shape`, byte `offset`) travels separately in the model manifest.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::graph::{Gradients, Graph, Var};
use crate::tensor::{Scalar, Tensor};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor<f32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, usize>,
}

/// One row of the manifest tensor table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<f32>) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(NnError::Config(format!("duplicate parameter name `{name}`")));
        }
        self.by_name.insert(name.clone(), self.params.len());
        self.params.push(Param { name, value });
        Ok(ParamId(self.params.len() - 1))
    }

    /// Uniform(−bound, bound) initialization.
    pub fn add_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        bound: f32,
        rng: &mut R,
    ) -> Result<ParamId> {
        let n = shape.iter().product();
        let data = if bound > 0.0 {
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            (0..n).map(|_| dist.sample(rng)).collect()
        } else {
            vec![0.0; n]
        };
        self.add(name, Tensor::new(shape.to_vec(), data)?)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    /// All values cast to `T`, in registration order.
    pub fn to_tensors<T: Scalar>(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| p.value.cast()).collect()
    }

    /// Record every parameter as a tracked leaf of `g`.
    pub fn bind<T: Scalar>(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.params.iter().map(|p| g.leaf(p.value.cast())).collect()
    }

    /// Record every parameter as an untracked constant of `g` (inference).
    pub fn bind_constants<T: Scalar>(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.params.iter().map(|p| g.constant(p.value.cast())).collect()
    }

    /// Gradients for every bound parameter as `f32`; untouched ones are zero.
    pub fn collect_grads<T: Scalar>(&self, vars: &[Var], grads: &mut Gradients<T>) -> Vec<Tensor<f32>> {
        self.params
            .iter()
            .zip(vars)
            .map(|(p, &v)| match grads.take(v) {
                Some(t) => t.cast(),
                None => Tensor::zeros(p.value.shape()),
            })
            .collect()
    }

    pub fn to_blob(&self) -> (Vec<TensorRecord>, Vec<u8>) {
        let mut table = Vec::with_capacity(self.params.len());
        let mut blob = Vec::with_capacity(self.num_scalars() * 4);
        for p in &self.params {
            table.push(TensorRecord {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                offset: blob.len(),
            });
            for v in p.value.data() {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        (table, blob)
    }

    pub fn from_blob(table: &[TensorRecord], blob: &[u8]) -> Result<Self> {
        let mut store = Self::new();
        let mut expected_offset = 0usize;
        for rec in table {
            let n: usize = rec.shape.iter().product();
            if rec.offset != expected_offset {
                return Err(NnError::Format(format!(
                    "tensor `{}` at offset {} but expected {}",
                    rec.name, rec.offset, expected_offset
                )));
            }
            let end = rec.offset + n * 4;
            let bytes = blob.get(rec.offset..end).ok_or_else(|| {
                NnError::Format(format!(
                    "blob too short for tensor `{}`: need {} bytes, have {}",
                    rec.name,
                    end,
                    blob.len()
                ))
            })?;
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            store.add(rec.name.clone(), Tensor::new(rec.shape.clone(), data)?)?;
            expected_offset = end;
        }
        if expected_offset != blob.len() {
            return Err(NnError::Format(format!(
                "blob has {} trailing bytes",
                blob.len() - expected_offset
            )));
        }
        Ok(store)
    }
}
