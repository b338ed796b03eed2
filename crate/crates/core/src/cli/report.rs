use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::stages::Artifacts;
use super::CliError;
use crate::error::Error;
use crate::metrics::{class_metrics, macro_average, ClassMetricsReport, ConfusionMatrix, NamingMode};
use crate::trainer::curve_from_csv;

pub const PREDICTIONS_HEADER: &str = "path\ttruth\tprediction";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub path: PathBuf,
    pub truth: usize,
    pub prediction: usize,
}

/// Writes `path<TAB>truth<TAB>prediction` with class names in the label
/// columns.
pub fn write_predictions(
    path: &Path,
    classes: &[String],
    predictions: &[Prediction],
    base: Option<&Path>,
) -> Result<(), CliError> {
    let mut out = format!("{PREDICTIONS_HEADER}\n");
    for p in predictions {
        let shown = base
            .and_then(|b| p.path.strip_prefix(b).ok())
            .unwrap_or(&p.path);
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            shown.display(),
            classes[p.truth],
            classes[p.prediction]
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e).into())
}

/// Reads a predictions TSV. Classes are the sorted union of every name in
/// the truth and prediction columns.
pub fn read_predictions(path: &Path) -> Result<(Vec<String>, Vec<Prediction>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || (i == 0 && line == PREDICTIONS_HEADER) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [p, t, q] = fields[..] else {
            return Err(CliError::Validation(format!(
                "{}:{}: expected 3 tab-separated fields",
                path.display(),
                i + 1
            )));
        };
        rows.push((p, t, q));
    }
    let classes: Vec<String> = rows
        .iter()
        .flat_map(|(_, t, q)| [*t, *q])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(String::from)
        .collect();
    let id = |name: &str| classes.binary_search_by(|c| c.as_str().cmp(name)).unwrap();
    let predictions = rows
        .into_iter()
        .map(|(p, t, q)| Prediction {
            path: PathBuf::from(p),
            truth: id(t),
            prediction: id(q),
        })
        .collect();
    Ok((classes, predictions))
}

fn read_confusion(path: &Path) -> Result<ConfusionMatrix, CliError> {
    let bad = |m: String| CliError::Runtime(Error::Metrics(format!("{}: {m}", path.display())));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .skip(1)
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let row = record
            .iter()
            .skip(1)
            .map(|v| v.parse::<u64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(e.to_string()))?;
        rows.push(row);
    }
    ConfusionMatrix::from_rows(names, &rows).map_err(|e| bad(e.to_string()))
}

fn pct(v: f64) -> String {
    format!("{:.2}%", v * 100.0)
}

fn hundredths(h: u64) -> String {
    format!("{}.{:02}", h / 100, h % 100)
}

fn metrics_table(out: &mut String, report: &ClassMetricsReport) {
    let mode = report.naming_mode;
    let legend = match mode {
        NamingMode::Standard => "precision = diag/column sum, recall = diag/row sum",
        NamingMode::Paper => "precision = diag/row sum, recall = diag/column sum",
    };
    let width = report.classes.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    let _ = writeln!(out, "per-class metrics, {mode} naming ({legend}); truncated to 2 decimals");
    let _ = writeln!(out, "  {:<width$}  {:>9}  {:>9}  {:>9}", "class", "precision", "recall", "f-measure");
    for c in &report.classes {
        let row = c.table_row(mode);
        let _ = writeln!(
            out,
            "  {:<width$}  {:>9}  {:>9}  {:>9}",
            c.name,
            hundredths(row.precision),
            hundredths(row.recall),
            hundredths(row.f_measure)
        );
    }
    let m = macro_average(report);
    let _ = writeln!(
        out,
        "  {:<width$}  {:>9}  {:>9}  {:>9}   (mean of truncated entries)",
        "macro",
        format!("{:.3}", m.table_precision),
        format!("{:.3}", m.table_recall),
        format!("{:.3}", m.table_f_measure)
    );
    let _ = writeln!(
        out,
        "  {:<width$}  {:>9}  {:>9}  {:>9}   (exact mean)",
        "macro",
        format!("{:.3}", m.precision * 100.0),
        format!("{:.3}", m.recall * 100.0),
        format!("{:.3}", m.f_measure * 100.0)
    );
    for w in report.warnings() {
        let _ = writeln!(out, "  warning: {w}");
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Renders the plain-text run summary from the artifacts on disk and writes
/// it to `summary.txt`.
pub fn emit_report(a: &Artifacts) -> Result<String, CliError> {
    let confusion_path = a.confusion();
    if !confusion_path.exists() {
        return Err(CliError::MissingArtifact {
            path: confusion_path,
            stage: "evaluate",
        });
    }
    let cm = read_confusion(&confusion_path)?;
    let standard = class_metrics(&cm, NamingMode::Standard);

    let mut out = String::new();
    let _ = writeln!(out, "classes: {}", cm.num_classes());
    let _ = writeln!(out, "test samples: {}", cm.total());
    let _ = writeln!(
        out,
        "overall accuracy: {} ({}/{})",
        pct(cm.overall_accuracy()?),
        cm.trace(),
        cm.total()
    );
    out.push('\n');
    metrics_table(&mut out, &standard);
    out.push('\n');
    metrics_table(&mut out, &standard.with_mode(NamingMode::Paper));
    out.push('\n');

    let curve_path = a.curve();
    if curve_path.exists() {
        let text = fs::read_to_string(&curve_path).map_err(|e| Error::io(&curve_path, e))?;
        let curve = curve_from_csv(&text)?;
        match curve.last() {
            None => {
                let _ = writeln!(out, "curve: empty");
            }
            Some(p) => {
                let _ = writeln!(out, "curve: {} points ({})", curve.len(), file_name(&curve_path));
                let _ = writeln!(out, "final cross-entropy: {:.6} (step {})", p.cross_entropy, p.step);
                let _ = writeln!(out, "final train batch accuracy: {}", pct(p.train_accuracy));
                if let Some(v) = p.validation_accuracy {
                    let _ = writeln!(out, "final validation accuracy: {}", pct(v));
                }
            }
        }
    } else {
        let _ = writeln!(out, "curve: not available");
    }

    let _ = writeln!(out, "files:");
    let mut files = vec![confusion_path];
    for mode in [NamingMode::Standard, NamingMode::Paper] {
        files.push(a.metrics_text(mode));
        files.push(a.metrics_csv(mode));
    }
    files.extend([a.curve(), a.predictions(), a.layer(), a.cache()]);
    for f in files.into_iter().filter(|f| f.exists()) {
        let _ = writeln!(out, "  {}", file_name(&f));
    }

    let summary_path = a.summary();
    fs::write(&summary_path, &out).map_err(|e| Error::io(&summary_path, e))?;
    Ok(out)
}
