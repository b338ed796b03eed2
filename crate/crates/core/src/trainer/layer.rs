use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SFTM";
const VERSION: u32 = 1;

/// Numerically stable softmax: the maximum logit is subtracted first.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Smallest probability fed to the log.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// The trainable final layer: `K` rows of `D` weights plus `K` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxLayer {
    classes: usize,
    dim: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl SoftmaxLayer {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        SoftmaxLayer {
            classes,
            dim,
            weights: vec![0.0; classes * dim],
            biases: vec![0.0; classes],
        }
    }

    pub fn from_parts(classes: usize, dim: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if weights.len() != classes * dim || biases.len() != classes {
            return Err(Error::Shape(format!(
                "layer {classes}x{dim} needs {} weights and {classes} biases, got {} and {}",
                classes * dim,
                weights.len(),
                biases.len()
            )));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("layer parameters must be finite".into()));
        }
        Ok(SoftmaxLayer {
            classes,
            dim,
            weights,
            biases,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights, &mut self.biases)
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!(
                "layer expects {}-dim features, got {}",
                self.dim,
                x.len()
            )));
        }
        Ok(())
    }

    /// Logits `W·x + b`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.logits(x))
    }

    pub(crate) fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim.max(1))
            .take(self.classes)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * (self.weights.len() + self.biases.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.classes as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in self.weights.iter().chain(&self.biases) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::LayerFormat(m.to_string());
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("bad magic (expected SFTM)"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        if word(4) != VERSION {
            return Err(bad("unsupported version"));
        }
        let (k, d) = (word(8) as usize, word(12) as usize);
        let n = k * d + k;
        if bytes.len() != 16 + 8 * n {
            return Err(bad("length does not match header"));
        }
        let mut values = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let weights = values.by_ref().take(k * d).collect();
        let biases = values.collect();
        SoftmaxLayer::from_parts(k, d, weights, biases)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        SoftmaxLayer::from_bytes(&bytes)
    }
}
