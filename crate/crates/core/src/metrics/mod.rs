//! Confusion matrices and per-class precision / recall / F-measure.
//!
//! Rows are actual classes and columns are predicted classes. Standard
//! precision is `diag / column sum` and standard recall is `diag / row sum`.
//! A [`NamingMode::Paper`] view swaps the two labels so tables that print
//! recall under "Precision" (and vice versa) can be reproduced verbatim.

mod report;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

pub use report::{
    class_metrics, macro_average, truncate_hundredths, ClassMetrics, ClassMetricsReport,
    MacroAverages, NamingMode, TableRow,
};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    class_names: Vec<String>,
    /// Row-major `K×K`.
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(class_names: Vec<String>) -> Self {
        let k = class_names.len();
        ConfusionMatrix {
            class_names,
            counts: vec![0; k * k],
        }
    }

    /// Builds from explicit rows (`rows[actual][predicted]`).
    pub fn from_rows(class_names: Vec<String>, rows: &[Vec<u64>]) -> Result<Self> {
        let k = class_names.len();
        if rows.len() != k || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Metrics(format!("confusion matrix must be {k}x{k}")));
        }
        Ok(ConfusionMatrix {
            class_names,
            counts: rows.concat(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    #[inline]
    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.num_classes() + predicted]
    }

    pub fn row_sum(&self, actual: usize) -> u64 {
        let k = self.num_classes();
        self.counts[actual * k..(actual + 1) * k].iter().sum()
    }

    pub fn column_sum(&self, predicted: usize) -> u64 {
        (0..self.num_classes()).map(|a| self.get(a, predicted)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|c| self.get(c, c)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.num_classes().max(1))
            .map(<[u64]>::to_vec)
            .collect()
    }

    /// `trace / total`.
    pub fn overall_accuracy(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::Metrics("accuracy of an empty confusion matrix".into())),
            total => Ok(self.trace() as f64 / total as f64),
        }
    }

    /// Header row of predicted class names, then one row per actual class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("actual\\predicted");
        for name in &self.class_names {
            out.push(',');
            out.push_str(&csv_field(name));
        }
        out.push('\n');
        for (a, name) in self.class_names.iter().enumerate() {
            out.push_str(&csv_field(name));
            for p in 0..self.num_classes() {
                let _ = write!(out, ",{}", self.get(a, p));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Tallies `(truth, prediction)` pairs into a `K×K` matrix.
pub fn build_confusion(
    truths: &[usize],
    predictions: &[usize],
    class_names: Vec<String>,
) -> Result<ConfusionMatrix> {
    if truths.len() != predictions.len() {
        return Err(Error::Metrics(format!(
            "{} truths but {} predictions",
            truths.len(),
            predictions.len()
        )));
    }
    let k = class_names.len();
    let mut cm = ConfusionMatrix::zeros(class_names);
    for (&t, &p) in truths.iter().zip(predictions) {
        if t >= k || p >= k {
            return Err(Error::Metrics(format!(
                "class id out of range for {k} classes: truth {t}, prediction {p}"
            )));
        }
        cm.counts[t * k + p] += 1;
    }
    Ok(cm)
}

impl FromStr for NamingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(NamingMode::Standard),
            "paper" => Ok(NamingMode::Paper),
            other => Err(Error::Config(format!("unknown naming mode `{other}`"))),
        }
    }
}
