//! Frozen feature extraction and the bottleneck cache.

mod cache;
mod import;
mod reference;
mod tensor;

pub use cache::{populate, BottleneckCache, CacheKey, PopulateStats};
pub use import::{import_bottlenecks, ImportReport};
pub use reference::{ReferenceExtractor, DEFAULT_EXTRACTOR_SEED, REFERENCE_DIM};
pub use tensor::{conv2d, maxpool2d, relu, relu_tensor, Kernels, Padding, Tensor3};

use crate::augment::Image;
use crate::error::{Error, Result};

/// A bottleneck vector. Values are finite and stored in single precision.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(Vec<f32>);

impl FeatureVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "feature value {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(FeatureVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| v as f64).collect()
    }
}

/// What produced a feature vector. `(name, version, weights_digest)` pins the
/// output for any given image.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExtractorIdentity {
    pub name: String,
    pub version: String,
    pub dim: usize,
    pub weights_digest: String,
}

pub trait FeatureExtractor: Sync {
    fn identity(&self) -> &ExtractorIdentity;

    fn extract(&self, img: &Image) -> Result<FeatureVector>;
}
