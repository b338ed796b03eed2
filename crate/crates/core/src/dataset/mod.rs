//! Directory-per-class datasets: manifests, ingestion, splitting and a
//! synthetic corpus generator.

mod ingest;
mod split;
mod synth;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use ingest::{ingest, IngestReport, SkippedFile};
pub use split::{split, SplitCounts, SplitReport};
pub use synth::{synth_generate, SynthSpec};

use crate::augment::Transform;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Original,
    Transformed(Transform),
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Original,
        Variant::Transformed(Transform::RotMinus30),
        Variant::Transformed(Transform::RotPlus30),
        Variant::Transformed(Transform::RotPlus90),
        Variant::Transformed(Transform::FlipH),
        Variant::Transformed(Transform::Shear),
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Transformed(t) => t.tag(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "original" {
            Ok(Variant::Original)
        } else {
            s.parse().map(Variant::Transformed)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Validation,
    Test,
    Unassigned,
}

impl Split {
    pub fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// How the test set is carved out of the data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SplitPolicy {
    /// All variants of a core image share one split.
    #[default]
    ByCoreImage,
    /// Records are split individually after augmentation; variants of one
    /// core image may land on both sides.
    AfterAugment,
}

impl FromStr for SplitPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "by_core_image" => Ok(SplitPolicy::ByCoreImage),
            "after_augment" => Ok(SplitPolicy::AfterAugment),
            other => Err(Error::Config(format!("unknown split policy `{other}`"))),
        }
    }
}

impl fmt::Display for SplitPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitPolicy::ByCoreImage => "by_core_image",
            SplitPolicy::AfterAugment => "after_augment",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleRecord {
    pub path: PathBuf,
    pub label: usize,
    /// SHA-256 hex of the un-augmented source file.
    pub core_id: String,
    pub variant: Variant,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    classes: Vec<String>,
    records: Vec<SampleRecord>,
    split_policy: SplitPolicy,
}

const TSV_HEADER: &str = "path\tlabel\tclass_name\tcore_id\tvariant\tsplit";

impl DatasetManifest {
    /// Builds a manifest, checking every structural invariant.
    pub fn new(
        classes: Vec<String>,
        records: Vec<SampleRecord>,
        split_policy: SplitPolicy,
    ) -> Result<Self> {
        let mut seen_names = HashSet::new();
        for name in &classes {
            if !seen_names.insert(name.as_str()) {
                return Err(Error::Dataset(format!("duplicate class name `{name}`")));
            }
        }
        let k = classes.len();
        let mut paths = HashSet::new();
        let mut core_labels: HashMap<&str, usize> = HashMap::new();
        let mut core_variants = HashSet::new();
        for r in &records {
            if r.label >= k {
                return Err(Error::Dataset(format!(
                    "{}: label {} out of range for {k} classes",
                    r.path.display(),
                    r.label
                )));
            }
            if !paths.insert(r.path.as_path()) {
                return Err(Error::Dataset(format!(
                    "duplicate record path {}",
                    r.path.display()
                )));
            }
            match core_labels.insert(r.core_id.as_str(), r.label) {
                Some(prev) if prev != r.label => {
                    return Err(Error::Dataset(format!(
                        "core image {} appears under labels {prev} and {}",
                        r.core_id, r.label
                    )));
                }
                _ => {}
            }
            if !core_variants.insert((r.core_id.as_str(), r.variant)) {
                return Err(Error::Dataset(format!(
                    "core image {} has more than one `{}` record",
                    r.core_id, r.variant
                )));
            }
        }
        Ok(DatasetManifest {
            classes,
            records,
            split_policy,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn split_policy(&self) -> SplitPolicy {
        self.split_policy
    }

    pub fn records_in(&self, split: Split) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Record count per class label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for r in &self.records {
            counts[r.label] += 1;
        }
        counts
    }

    /// Serializes to the TSV manifest format. Paths under the manifest's own
    /// directory are written relative to it.
    pub fn to_tsv(&self, base: Option<&Path>) -> Result<String> {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(TSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let rel = base
                .and_then(|b| r.path.strip_prefix(b).ok())
                .unwrap_or(&r.path);
            let path = rel.to_str().ok_or_else(|| {
                Error::Dataset(format!("path {} is not UTF-8", r.path.display()))
            })?;
            if path.contains(['\t', '\n', '\r']) {
                return Err(Error::Dataset(format!(
                    "path {path:?} contains a tab or newline"
                )));
            }
            out.push_str(&format!(
                "{path}\t{}\t{}\t{}\t{}\t{}\n",
                r.label, self.classes[r.label], r.core_id, r.variant, r.split
            ));
        }
        Ok(out)
    }

    /// Parses the TSV manifest format; relative paths are joined onto `base`.
    pub fn from_tsv(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == TSV_HEADER => {}
            _ => {
                return Err(Error::Manifest {
                    line: 1,
                    message: format!("expected header `{TSV_HEADER}`"),
                })
            }
        }
        let mut names: BTreeMap<usize, String> = BTreeMap::new();
        let mut records = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Manifest {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            let [path, label, class_name, core_id, variant, split] = fields[..] else {
                return Err(bad(format!("expected 6 fields, got {}", fields.len())));
            };
            let label: usize = label
                .parse()
                .map_err(|_| bad(format!("bad label `{label}`")))?;
            match names.get(&label) {
                Some(existing) if existing != class_name => {
                    return Err(bad(format!(
                        "label {label} named both `{existing}` and `{class_name}`"
                    )))
                }
                Some(_) => {}
                None => {
                    names.insert(label, class_name.to_string());
                }
            }
            let path = PathBuf::from(path);
            let path = match base {
                Some(b) if path.is_relative() => b.join(path),
                _ => path,
            };
            records.push(SampleRecord {
                path,
                label,
                core_id: core_id.to_string(),
                variant: variant.parse().map_err(|e: Error| bad(e.to_string()))?,
                split: split.parse().map_err(|e: Error| bad(e.to_string()))?,
            });
        }
        if names.keys().copied().ne(0..names.len()) {
            return Err(Error::Manifest {
                line: 0,
                message: "labels are not contiguous from 0".into(),
            });
        }
        DatasetManifest::new(names.into_values().collect(), records, SplitPolicy::default())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.to_tsv(path.parent())?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DatasetManifest::from_tsv(&text, path.parent())
    }

    pub(crate) fn with_records(&self, records: Vec<SampleRecord>, policy: SplitPolicy) -> Self {
        DatasetManifest {
            classes: self.classes.clone(),
            records,
            split_policy: policy,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(path: &str, label: usize, core: &str, variant: Variant) -> SampleRecord {
        SampleRecord {
            path: PathBuf::from(path),
            label,
            core_id: core.into(),
            variant,
            split: Split::Unassigned,
        }
    }

    fn classes() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn rejects_invariant_violations() {
        let dup_class = DatasetManifest::new(
            vec!["a".into(), "a".into()],
            vec![],
            SplitPolicy::ByCoreImage,
        );
        assert!(dup_class.is_err());

        let out_of_range = vec![rec("x", 2, "c", Variant::Original)];
        assert!(DatasetManifest::new(classes(), out_of_range, SplitPolicy::ByCoreImage).is_err());

        let dup_path = vec![
            rec("x", 0, "c1", Variant::Original),
            rec("x", 0, "c2", Variant::Original),
        ];
        assert!(DatasetManifest::new(classes(), dup_path, SplitPolicy::ByCoreImage).is_err());

        let core_two_labels = vec![
            rec("x", 0, "c", Variant::Original),
            rec("y", 1, "c", Variant::Transformed(Transform::FlipH)),
        ];
        assert!(
            DatasetManifest::new(classes(), core_two_labels, SplitPolicy::ByCoreImage).is_err()
        );

        let dup_variant = vec![
            rec("x", 0, "c", Variant::Original),
            rec("y", 0, "c", Variant::Original),
        ];
        assert!(DatasetManifest::new(classes(), dup_variant, SplitPolicy::ByCoreImage).is_err());
    }

    #[test]
    fn tsv_round_trip_with_relative_paths() {
        let mut records = vec![
            rec("/data/out/a/1.png", 0, "c1", Variant::Original),
            rec("/elsewhere/2.png", 1, "c2", Variant::Transformed(Transform::Shear)),
        ];
        records[1].split = Split::Validation;
        let m = DatasetManifest::new(classes(), records, SplitPolicy::ByCoreImage).unwrap();
        let base = Path::new("/data/out");
        let text = m.to_tsv(Some(base)).unwrap();
        assert!(text.starts_with("path\tlabel\tclass_name\tcore_id\tvariant\tsplit\n"));
        assert!(text.contains("\na/1.png\t0\ta\tc1\toriginal\tunassigned\n"));
        assert_eq!(DatasetManifest::from_tsv(&text, Some(base)).unwrap(), m);
    }

    #[test]
    fn tsv_rejects_inconsistent_class_names() {
        let text = format!("{TSV_HEADER}\nx\t0\ta\tc1\toriginal\ttrain\ny\t0\tb\tc2\toriginal\ttrain\n");
        assert!(DatasetManifest::from_tsv(&text, None).is_err());
        let gap = format!("{TSV_HEADER}\nx\t1\ta\tc1\toriginal\ttrain\n");
        assert!(DatasetManifest::from_tsv(&gap, None).is_err());
    }
}
