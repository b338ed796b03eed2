use std::fmt::{self, Write as _};

use super::{csv_field, ConfusionMatrix};

/// Which label each ratio is printed under.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NamingMode {
    /// Precision = diag / column sum, recall = diag / row sum.
    #[default]
    Standard,
    /// Labels swapped: "Precision" shows diag / row sum and "Recall" shows
    /// diag / column sum.
    Paper,
}

impl fmt::Display for NamingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NamingMode::Standard => "standard",
            NamingMode::Paper => "paper",
        })
    }
}

/// `num / den` as a percentage truncated (not rounded) to two decimals,
/// returned in hundredths of a percent. Zero when `den == 0`.
pub fn truncate_hundredths(num: u64, den: u64) -> u64 {
    (num * 10_000).checked_div(den).unwrap_or(0)
}

/// Metrics for one class, always under their standard definitions.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassMetrics {
    pub name: String,
    pub true_positives: u64,
    pub row_sum: u64,
    pub column_sum: u64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// Set when nothing was predicted as this class.
    pub precision_undefined: bool,
    /// Set when the class has no test samples.
    pub recall_undefined: bool,
}

/// A printed table row: values in hundredths of a percent, truncated.
/// `f_measure` is the harmonic mean of the two truncated ratios, truncated
/// again, which is how such tables are usually filled in by hand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TableRow {
    pub precision: u64,
    pub recall: u64,
    pub f_measure: u64,
}

impl TableRow {
    pub fn as_percentages(&self) -> (f64, f64, f64) {
        (
            self.precision as f64 / 100.0,
            self.recall as f64 / 100.0,
            self.f_measure as f64 / 100.0,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassMetricsReport {
    pub classes: Vec<ClassMetrics>,
    pub naming_mode: NamingMode,
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn class_metrics(cm: &ConfusionMatrix, naming_mode: NamingMode) -> ClassMetricsReport {
    let classes = (0..cm.num_classes())
        .map(|c| {
            let tp = cm.get(c, c);
            let (row, col) = (cm.row_sum(c), cm.column_sum(c));
            let precision = if col == 0 { 0.0 } else { tp as f64 / col as f64 };
            let recall = if row == 0 { 0.0 } else { tp as f64 / row as f64 };
            ClassMetrics {
                name: cm.class_names()[c].clone(),
                true_positives: tp,
                row_sum: row,
                column_sum: col,
                precision,
                recall,
                f_measure: harmonic(precision, recall),
                precision_undefined: col == 0,
                recall_undefined: row == 0,
            }
        })
        .collect();
    ClassMetricsReport {
        classes,
        naming_mode,
    }
}

impl ClassMetrics {
    /// (value shown as "Precision", value shown as "Recall") under `mode`.
    pub fn labeled(&self, mode: NamingMode) -> (f64, f64) {
        match mode {
            NamingMode::Standard => (self.precision, self.recall),
            NamingMode::Paper => (self.recall, self.precision),
        }
    }

    pub fn table_row(&self, mode: NamingMode) -> TableRow {
        let p = truncate_hundredths(self.true_positives, self.column_sum);
        let r = truncate_hundredths(self.true_positives, self.row_sum);
        let f = (2 * p * r).checked_div(p + r).unwrap_or(0);
        let (precision, recall) = match mode {
            NamingMode::Standard => (p, r),
            NamingMode::Paper => (r, p),
        };
        TableRow {
            precision,
            recall,
            f_measure: f,
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.precision_undefined {
            w.push(format!("{}: no predictions, precision reported as 0", self.name));
        }
        if self.recall_undefined {
            w.push(format!("{}: no samples, recall reported as 0", self.name));
        }
        w
    }
}

/// Unweighted means over classes, labeled per the report's naming mode.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroAverages {
    pub naming_mode: NamingMode,
    /// Exact mean of the ratios, as fractions.
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// Mean of the truncated table entries, as percentages.
    pub table_precision: f64,
    pub table_recall: f64,
    pub table_f_measure: f64,
}

pub fn macro_average(report: &ClassMetricsReport) -> MacroAverages {
    let mode = report.naming_mode;
    let k = report.classes.len().max(1) as f64;
    let mean = |f: &dyn Fn(&ClassMetrics) -> f64| report.classes.iter().map(f).sum::<f64>() / k;
    let table_mean = |f: &dyn Fn(&TableRow) -> u64| {
        report.classes.iter().map(|c| f(&c.table_row(mode))).sum::<u64>() as f64 / (100.0 * k)
    };
    MacroAverages {
        naming_mode: mode,
        precision: mean(&|c| c.labeled(mode).0),
        recall: mean(&|c| c.labeled(mode).1),
        f_measure: mean(&|c| c.f_measure),
        table_precision: table_mean(&|r| r.precision),
        table_recall: table_mean(&|r| r.recall),
        table_f_measure: table_mean(&|r| r.f_measure),
    }
}

fn hundredths(h: u64) -> String {
    format!("{}.{:02}", h / 100, h % 100)
}

impl ClassMetricsReport {
    pub fn with_mode(&self, naming_mode: NamingMode) -> Self {
        ClassMetricsReport {
            classes: self.classes.clone(),
            naming_mode,
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        self.classes.iter().flat_map(ClassMetrics::warnings).collect()
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mode = self.naming_mode;
        let mut out = String::new();
        let _ = writeln!(out, "naming_mode = {mode}");
        for c in &self.classes {
            let (p, r) = c.labeled(mode);
            let row = c.table_row(mode);
            let _ = writeln!(out, "class.{}.precision = {p}", c.name);
            let _ = writeln!(out, "class.{}.recall = {r}", c.name);
            let _ = writeln!(out, "class.{}.f_measure = {}", c.name, c.f_measure);
            let _ = writeln!(out, "class.{}.table_precision_pct = {}", c.name, hundredths(row.precision));
            let _ = writeln!(out, "class.{}.table_recall_pct = {}", c.name, hundredths(row.recall));
            let _ = writeln!(out, "class.{}.table_f_measure_pct = {}", c.name, hundredths(row.f_measure));
        }
        let m = macro_average(self);
        let _ = writeln!(out, "macro.precision = {}", m.precision);
        let _ = writeln!(out, "macro.recall = {}", m.recall);
        let _ = writeln!(out, "macro.f_measure = {}", m.f_measure);
        let _ = writeln!(out, "macro.table_precision_pct = {}", m.table_precision);
        let _ = writeln!(out, "macro.table_recall_pct = {}", m.table_recall);
        let _ = writeln!(out, "macro.table_f_measure_pct = {}", m.table_f_measure);
        for w in self.warnings() {
            let _ = writeln!(out, "warning = {w}");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mode = self.naming_mode;
        let mut out = String::from(
            "naming_mode,class,precision,recall,f_measure,table_precision_pct,table_recall_pct,table_f_measure_pct\n",
        );
        for c in &self.classes {
            let (p, r) = c.labeled(mode);
            let row = c.table_row(mode);
            let _ = writeln!(
                out,
                "{mode},{},{p},{r},{},{},{},{}",
                csv_field(&c.name),
                c.f_measure,
                hundredths(row.precision),
                hundredths(row.recall),
                hundredths(row.f_measure)
            );
        }
        let m = macro_average(self);
        let _ = writeln!(
            out,
            "{mode},macro,{},{},{},{},{},{}",
            m.precision, m.recall, m.f_measure, m.table_precision, m.table_recall, m.table_f_measure
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: &[Vec<u64>]) -> ConfusionMatrix {
        let names = (0..rows.len()).map(|i| format!("c{i}")).collect();
        ConfusionMatrix::from_rows(names, rows).unwrap()
    }

    #[test]
    fn identity_is_perfect() {
        let r = class_metrics(&cm(&[vec![4, 0, 0], vec![0, 2, 0], vec![0, 0, 9]]), NamingMode::Standard);
        for c in &r.classes {
            assert_eq!((c.precision, c.recall, c.f_measure), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn zero_denominators_flagged() {
        let r = class_metrics(&cm(&[vec![3, 0], vec![2, 0]]), NamingMode::Standard);
        let c1 = &r.classes[1];
        assert!(c1.precision_undefined && !c1.recall_undefined);
        assert_eq!((c1.precision, c1.recall, c1.f_measure), (0.0, 0.0, 0.0));
        assert_eq!(r.warnings().len(), 1);

        let empty = class_metrics(&cm(&[vec![0, 0], vec![0, 1]]), NamingMode::Standard);
        assert!(empty.classes[0].recall_undefined && empty.classes[0].precision_undefined);
    }

    #[test]
    fn paper_mode_swaps_labels_only() {
        let m = cm(&[vec![3, 1], vec![2, 4]]);
        let std = class_metrics(&m, NamingMode::Standard);
        let paper = class_metrics(&m, NamingMode::Paper);
        let c = &std.classes[0];
        assert_eq!(paper.classes[0].labeled(NamingMode::Paper), (c.recall, c.precision));
        assert_eq!(c.table_row(NamingMode::Standard).f_measure, c.table_row(NamingMode::Paper).f_measure);
        assert!(paper.to_text().starts_with("naming_mode = paper\n"));
        assert!(std.to_csv().lines().nth(1).unwrap().starts_with("standard,c0,"));
    }

    #[test]
    fn truncation_is_not_rounding() {
        assert_eq!(truncate_hundredths(2, 3), 6666);
        assert_eq!(truncate_hundredths(87, 120), 7250);
        assert_eq!(truncate_hundredths(1, 0), 0);
        assert_eq!(hundredths(7250), "72.50");
        assert_eq!(hundredths(5), "0.05");
    }
}
