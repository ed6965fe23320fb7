//! Named flat parameter storage shared by every trainable model.

use crate::error::{Error, Result};

/// A named, shaped, row-major array of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let want: usize = shape.iter().product();
        if want != data.len() {
            return Err(Error::Shape(format!(
                "tensor {name}: shape {shape:?} needs {want} values, got {}",
                data.len()
            )));
        }
        Ok(Self { name, shape, data })
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            name: name.into(),
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Ordered collection of uniquely named tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet {
    tensors: Vec<Tensor>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a tensor and returns its slot index.
    pub fn push(&mut self, t: Tensor) -> Result<usize> {
        if self.index_of(&t.name).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate tensor name {}", t.name)));
        }
        self.tensors.push(t);
        Ok(self.tensors.len() - 1)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    #[inline]
    pub fn slot(&self, i: usize) -> &[f64] {
        &self.tensors[i].data
    }

    #[inline]
    pub fn slot_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.tensors[i].data
    }

    /// Total number of scalar parameters.
    pub fn num_elements(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.name.clone(), t.shape.clone()))
                .collect(),
        }
    }

    /// True when both sets have the same names and shapes in the same order.
    pub fn same_layout(&self, other: &ParameterSet) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }

    pub fn check_layout(&self, other: &ParameterSet) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::Shape("parameter sets have different layouts".into()))
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ParameterSet) -> Result<()> {
        self.check_layout(other)?;
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += alpha * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    /// Scalar at flat position `(slot, element)`.
    pub fn value(&self, slot: usize, elem: usize) -> f64 {
        self.tensors[slot].data[elem]
    }

    pub fn set_value(&mut self, slot: usize, elem: usize, v: f64) {
        self.tensors[slot].data[elem] = v;
    }

    /// Maps a global flat index to `(slot, element)`.
    pub fn locate(&self, mut flat: usize) -> Option<(usize, usize)> {
        for (i, t) in self.tensors.iter().enumerate() {
            if flat < t.len() {
                return Some((i, flat));
            }
            flat -= t.len();
        }
        None
    }

    /// Appends every tensor from `other`, renaming with `prefix`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: ParameterSet) -> Result<Vec<usize>> {
        other
            .tensors
            .into_iter()
            .map(|mut t| {
                t.name = format!("{prefix}{}", t.name);
                self.push(t)
            })
            .collect()
    }
}
