//! Final-layer retraining: multinomial logistic regression over frozen
//! bottleneck features, fitted with plain minibatch SGD.

mod layer;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use layer::{argmax, cross_entropy, softmax, SoftmaxLayer, PROB_FLOOR};

use crate::error::{Error, Result};

/// A feature vector with its class label.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Example {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Example { features, label }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub val_fraction: f64,
    pub eval_interval: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            steps: 4000,
            batch_size: 10,
            learning_rate: 0.01,
            seed: 0,
            val_fraction: 0.1,
            eval_interval: 10,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!(
                "val_fraction must be in [0, 1), got {}",
                self.val_fraction
            )));
        }
        if self.eval_interval == 0 {
            return Err(Error::Config("eval_interval must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingCurvePoint {
    pub step: usize,
    /// Accuracy on this step's minibatch.
    pub train_accuracy: f64,
    /// Accuracy on the full validation set; `None` when it is empty.
    pub validation_accuracy: Option<f64>,
    /// Mean cross-entropy of this step's minibatch.
    pub cross_entropy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRun {
    pub layer: SoftmaxLayer,
    pub curve: Vec<TrainingCurvePoint>,
    /// Pre-update minibatch loss of every step.
    pub step_losses: Vec<f64>,
}

/// Mean cross-entropy over `batch` and its gradient with respect to the
/// weights (row-major `K×D`) and biases.
pub fn loss_and_gradients(
    layer: &SoftmaxLayer,
    batch: &[&Example],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (k, d) = (layer.classes(), layer.dim());
    let mut grad_w = vec![0.0; k * d];
    let mut grad_b = vec![0.0; k];
    let mut loss = 0.0;
    for ex in batch {
        layer.check_dim(&ex.features)?;
        let mut delta = softmax(&layer.logits(&ex.features));
        loss += cross_entropy(&delta, ex.label);
        delta[ex.label] -= 1.0;
        for (c, &g) in delta.iter().enumerate() {
            grad_b[c] += g;
            for (gw, &x) in grad_w[c * d..(c + 1) * d].iter_mut().zip(&ex.features) {
                *gw += g * x;
            }
        }
    }
    let n = batch.len() as f64;
    grad_w.iter_mut().chain(grad_b.iter_mut()).for_each(|g| *g /= n);
    Ok((loss / n, grad_w, grad_b))
}

/// One SGD update on the mean batch loss. Returns the loss before the update.
pub fn sgd_step(layer: &mut SoftmaxLayer, batch: &[&Example], learning_rate: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Config("SGD batch must not be empty".into()));
    }
    if let Some(ex) = batch.iter().find(|e| e.label >= layer.classes()) {
        return Err(Error::Shape(format!(
            "label {} out of range for {} classes",
            ex.label,
            layer.classes()
        )));
    }
    let (loss, grad_w, grad_b) = loss_and_gradients(layer, batch)?;
    if !loss.is_finite() || grad_w.iter().chain(&grad_b).any(|g| !g.is_finite()) {
        return Err(Error::Numerical(
            "non-finite gradient; the feature vectors are likely corrupted".into(),
        ));
    }
    let (w, b) = layer.params_mut();
    for (p, g) in w.iter_mut().zip(&grad_w).chain(b.iter_mut().zip(&grad_b)) {
        *p -= learning_rate * g;
    }
    Ok(loss)
}

pub fn accuracy(layer: &SoftmaxLayer, examples: &[Example]) -> Option<f64> {
    if examples.is_empty() {
        return None;
    }
    let correct = examples
        .par_iter()
        .filter(|e| argmax(&layer.logits(&e.features)) == e.label)
        .count();
    Some(correct as f64 / examples.len() as f64)
}

/// Runs `config.steps` minibatch SGD steps from a zero-initialized layer.
///
/// Each step draws `batch_size` distinct training examples (draws are
/// independent across steps) from a ChaCha8 stream seeded with
/// `config.seed`. Every `eval_interval` steps, starting at step 0, a curve
/// point is recorded from the pre-update parameters.
pub fn train(
    config: &TrainingConfig,
    classes: usize,
    train_set: &[Example],
    val_set: &[Example],
) -> Result<TrainingRun> {
    config.validate()?;
    let Some(first) = train_set.first() else {
        return Err(Error::Dataset("training set is empty".into()));
    };
    if config.batch_size > train_set.len() {
        return Err(Error::Config(format!(
            "batch_size {} exceeds training set size {}",
            config.batch_size,
            train_set.len()
        )));
    }
    let dim = first.features.len();
    for ex in train_set.iter().chain(val_set) {
        if ex.features.len() != dim {
            return Err(Error::Shape(format!(
                "inconsistent feature dims: {} vs {dim}",
                ex.features.len()
            )));
        }
        if ex.label >= classes {
            return Err(Error::Shape(format!(
                "label {} out of range for {classes} classes",
                ex.label
            )));
        }
    }

    let mut layer = SoftmaxLayer::zeros(classes, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut curve = Vec::with_capacity(config.steps / config.eval_interval + 1);
    let mut step_losses = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let batch: Vec<&Example> = rand::seq::index::sample(&mut rng, train_set.len(), config.batch_size)
            .into_iter()
            .map(|i| &train_set[i])
            .collect();
        if step % config.eval_interval == 0 {
            let correct = batch
                .iter()
                .filter(|e| argmax(&layer.logits(&e.features)) == e.label)
                .count();
            curve.push(TrainingCurvePoint {
                step,
                train_accuracy: correct as f64 / batch.len() as f64,
                validation_accuracy: accuracy(&layer, val_set),
                cross_entropy: f64::NAN,
            });
        }
        let loss = sgd_step(&mut layer, &batch, config.learning_rate)?;
        if step % config.eval_interval == 0 {
            curve.last_mut().unwrap().cross_entropy = loss;
        }
        step_losses.push(loss);
    }
    Ok(TrainingRun {
        layer,
        curve,
        step_losses,
    })
}

/// Mean of a window of losses; `None` when the window is out of range.
pub fn window_mean(losses: &[f64], start: usize, len: usize) -> Option<f64> {
    let w = losses.get(start..start.checked_add(len)?)?;
    if w.is_empty() {
        return None;
    }
    Some(w.iter().sum::<f64>() / w.len() as f64)
}

pub const CURVE_HEADER: &str = "step,train_accuracy,validation_accuracy,cross_entropy";

pub fn curve_to_csv(curve: &[TrainingCurvePoint]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in curve {
        let val = p.validation_accuracy.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", p.step, p.train_accuracy, val, p.cross_entropy);
    }
    out
}

pub fn curve_from_csv(text: &str) -> Result<Vec<TrainingCurvePoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(Error::Config(format!("curve CSV must start with `{CURVE_HEADER}`")));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let bad = || Error::Config(format!("malformed curve row `{line}`"));
            let f: Vec<&str> = line.split(',').collect();
            let [step, train, val, ce] = f[..] else {
                return Err(bad());
            };
            Ok(TrainingCurvePoint {
                step: step.parse().map_err(|_| bad())?,
                train_accuracy: train.parse().map_err(|_| bad())?,
                validation_accuracy: if val.is_empty() {
                    None
                } else {
                    Some(val.parse().map_err(|_| bad())?)
                },
                cross_entropy: ce.parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub fn write_curve(path: &Path, curve: &[TrainingCurvePoint]) -> Result<()> {
    fs::write(path, curve_to_csv(curve)).map_err(|e| Error::io(path, e))
}
