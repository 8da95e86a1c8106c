//! Dense row-major f64 tensors and the named parameter store.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.contains(&0) {
            return Err(Error::Dimension(format!(
                "zero dimension in shape {shape:?}"
            )));
        }
        if numel != values.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} implies {numel} values, got {}",
                values.len()
            )));
        }
        Ok(Tensor { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape,
            values: vec![0.0; numel],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            values: vec![v],
        }
    }

    /// Uniform init on [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    pub fn uniform_init(shape: Vec<usize>, fan_in: usize, rng: &mut RngState) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let numel: usize = shape.iter().product();
        let values = (0..numel).map(|_| rng.uniform(-bound, bound)).collect();
        Tensor { shape, values }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Named parameters with deterministic (lexicographic) iteration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Names are unique and shapes immutable once inserted.
    pub fn insert(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        if self.params.contains_key(name) {
            return Err(Error::Contract(format!(
                "duplicate parameter name '{name}'"
            )));
        }
        self.params.insert(name.to_string(), tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn total_values(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }
}
