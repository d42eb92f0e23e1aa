use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ClassifierError, Subtype};
use crate::nn::Tensor;

/// Backbone feature maps with one class label per sample. The subtype,
/// when known, is only used for per-subtype reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    sample_shape: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<usize>,
    subtypes: Vec<Option<Subtype>>,
}

impl FeatureSet {
    pub fn new(sample_shape: Vec<usize>) -> Self {
        Self {
            sample_shape,
            values: Vec::new(),
            labels: Vec::new(),
            subtypes: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        features: &Tensor,
        label: usize,
        subtype: Option<Subtype>,
    ) -> Result<(), ClassifierError> {
        if features.shape() != self.sample_shape.as_slice() {
            return Err(ClassifierError::ShapeMismatch {
                expected: self.sample_shape.clone(),
                found: features.shape().to_vec(),
            });
        }
        features.ensure_finite()?;
        self.values.extend_from_slice(features.data());
        self.labels.push(label);
        self.subtypes.push(subtype);
        Ok(())
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.sample_shape
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn subtypes(&self) -> &[Option<Subtype>] {
        &self.subtypes
    }

    fn sample_len(&self) -> usize {
        self.sample_shape.iter().product()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let n = self.sample_len();
        &self.values[i * n..(i + 1) * n]
    }

    /// Selected samples stacked into `[len, ..sample_shape]`.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor, ClassifierError> {
        let mut data = Vec::with_capacity(indices.len() * self.sample_len());
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        let mut shape = alloc::vec![indices.len()];
        shape.extend_from_slice(&self.sample_shape);
        Ok(Tensor::new(shape, data)?)
    }

    pub fn all(&self) -> Result<Tensor, ClassifierError> {
        let idx: Vec<usize> = (0..self.len()).collect();
        self.batch(&idx)
    }

    pub fn subset(&self, indices: &[usize]) -> FeatureSet {
        let mut out = FeatureSet::new(self.sample_shape.clone());
        for &i in indices {
            out.values.extend_from_slice(self.sample(i));
            out.labels.push(self.labels[i]);
            out.subtypes.push(self.subtypes[i]);
        }
        out
    }
}
