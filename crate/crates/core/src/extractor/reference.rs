use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::tensor::{conv2d, maxpool2d, relu_tensor, Kernels, Padding, Tensor3};
use super::{ExtractorIdentity, FeatureExtractor, FeatureVector};
use crate::augment::Image;
use crate::error::{Error, Result};

pub const REFERENCE_DIM: usize = 128;
pub const DEFAULT_EXTRACTOR_SEED: u64 = 42;

const NAME: &str = "reference-minicnn";
const VERSION: &str = "1";
const CONV1_OUT: usize = 8;
const CONV2_OUT: usize = 16;
/// Scale on the variance-1/fan-in projection. Pooled activations are small
/// and mostly positive; without the gain, bottleneck values have a spread
/// of about 0.2 and a softmax layer at lr 0.01 converges very slowly.
const PROJECTION_GAIN: f64 = 5.0;

/// A small untrained CNN with seeded random weights:
/// conv3×3(3→8) → ReLU → pool → conv3×3(8→16) → ReLU → pool → flatten →
/// fixed linear projection to 128 values.
///
/// Weights are drawn once from the seed and never change, so the extractor
/// is frozen by construction.
pub struct ReferenceExtractor {
    input_width: u32,
    input_height: u32,
    conv1: Kernels,
    conv2: Kernels,
    /// `REFERENCE_DIM` rows of `flat_len` weights.
    projection: Vec<f64>,
    flat_len: usize,
    identity: ExtractorIdentity,
    calls: AtomicUsize,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

impl ReferenceExtractor {
    pub fn new(seed: u64, input_width: u32, input_height: u32) -> Result<Self> {
        if input_width < 4 || input_height < 4 {
            return Err(Error::Config(format!(
                "reference extractor needs at least 4x4 input, got {input_width}x{input_height}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fan1 = 3 * 3 * 3;
        let conv1 = Kernels::new(CONV1_OUT, 3, 3, 3, uniform(&mut rng, CONV1_OUT * fan1, (6.0 / fan1 as f64).sqrt()))?;
        let fan2 = 3 * 3 * CONV1_OUT;
        let conv2 = Kernels::new(
            CONV2_OUT,
            3,
            3,
            CONV1_OUT,
            uniform(&mut rng, CONV2_OUT * fan2, (6.0 / fan2 as f64).sqrt()),
        )?;
        let flat_len = (input_height as usize / 2 / 2) * (input_width as usize / 2 / 2) * CONV2_OUT;
        let projection = uniform(
            &mut rng,
            REFERENCE_DIM * flat_len,
            PROJECTION_GAIN * (3.0 / flat_len as f64).sqrt(),
        );

        let mut hasher = Sha256::new();
        hasher.update(NAME.as_bytes());
        hasher.update(VERSION.as_bytes());
        for n in [input_width, input_height, REFERENCE_DIM as u32] {
            hasher.update(n.to_le_bytes());
        }
        for w in conv1.data().iter().chain(conv2.data()).chain(&projection) {
            hasher.update(w.to_le_bytes());
        }
        let identity = ExtractorIdentity {
            name: NAME.into(),
            version: VERSION.into(),
            dim: REFERENCE_DIM,
            weights_digest: hex::encode(hasher.finalize()),
        };
        Ok(ReferenceExtractor {
            input_width,
            input_height,
            conv1,
            conv2,
            projection,
            flat_len,
            identity,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn input_size(&self) -> (u32, u32) {
        (self.input_width, self.input_height)
    }

    /// Number of `extract` invocations so far.
    pub fn extract_count(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    /// The flattened activation volume before projection.
    pub fn activations(&self, img: &Image) -> Result<Vec<f64>> {
        if (img.width(), img.height()) != (self.input_width, self.input_height) {
            return Err(Error::Shape(format!(
                "extractor expects {}x{} input, got {}x{}",
                self.input_width,
                self.input_height,
                img.width(),
                img.height()
            )));
        }
        let scaled = img.pixels().iter().map(|&b| b as f64 / 255.0).collect();
        let x = Tensor3::new(img.height() as usize, img.width() as usize, 3, scaled)?;
        let x = maxpool2d(&relu_tensor(conv2d(&x, &self.conv1, 1, Padding::Same)?))?;
        let x = maxpool2d(&relu_tensor(conv2d(&x, &self.conv2, 1, Padding::Same)?))?;
        debug_assert_eq!(x.data().len(), self.flat_len);
        Ok(x.into_data())
    }
}

impl FeatureExtractor for ReferenceExtractor {
    fn identity(&self) -> &ExtractorIdentity {
        &self.identity
    }

    fn extract(&self, img: &Image) -> Result<FeatureVector> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let flat = self.activations(img)?;
        let values = self
            .projection
            .chunks_exact(self.flat_len)
            .map(|row| row.iter().zip(&flat).map(|(w, a)| w * a).sum::<f64>() as f32)
            .collect();
        FeatureVector::new(values)
    }
}
