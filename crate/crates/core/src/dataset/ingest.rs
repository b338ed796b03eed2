use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;

use super::{DatasetManifest, SampleRecord, Split, SplitPolicy, Variant};
use crate::augment::Image;
use crate::error::{Error, Result};
use crate::hash::sha256_hex;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub skipped: Vec<SkippedFile>,
}

pub(crate) fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Scans `root/<class>/<image>` into a manifest. Classes are ordered by
/// directory name; undecodable files and byte-identical duplicates are
/// skipped and listed in the report.
pub fn ingest(root: &Path) -> Result<(DatasetManifest, IngestReport)> {
    if !root.is_dir() {
        return Err(Error::Dataset(format!(
            "dataset root {} is not a directory",
            root.display()
        )));
    }
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if class_dirs.is_empty() {
        return Err(Error::Dataset(format!(
            "dataset root {} has no class subdirectories",
            root.display()
        )));
    }

    let mut classes = Vec::with_capacity(class_dirs.len());
    let mut records = Vec::new();
    let mut report = IngestReport::default();
    let mut seen: HashMap<String, PathBuf> = HashMap::new();

    for (label, dir) in class_dirs.iter().enumerate() {
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Dataset(format!("class directory {} is not UTF-8", dir.display())))?
            .to_string();
        let files: Vec<PathBuf> = sorted_entries(dir)?
            .into_iter()
            .filter(|p| p.is_file() && is_image_file(p))
            .collect();

        let decoded: Vec<(PathBuf, std::result::Result<String, String>)> = files
            .into_par_iter()
            .map(|path| {
                let outcome = match fs::read(&path) {
                    Ok(bytes) => Image::decode(&bytes).map(|_| sha256_hex(&bytes)),
                    Err(e) => Err(e.to_string()),
                };
                (path, outcome)
            })
            .collect();

        let mut kept = 0usize;
        for (path, outcome) in decoded {
            match outcome {
                Ok(core_id) => {
                    if let Some(first) = seen.get(&core_id) {
                        let reason = format!("duplicate of {}", first.display());
                        warn!("skipping {}: {reason}", path.display());
                        report.skipped.push(SkippedFile { path, reason });
                        continue;
                    }
                    seen.insert(core_id.clone(), path.clone());
                    records.push(SampleRecord {
                        path,
                        label,
                        core_id,
                        variant: Variant::Original,
                        split: Split::Unassigned,
                    });
                    kept += 1;
                }
                Err(reason) => {
                    warn!("skipping undecodable {}: {reason}", path.display());
                    report.skipped.push(SkippedFile { path, reason });
                }
            }
        }
        if kept == 0 {
            return Err(Error::Dataset(format!("class `{name}` has no usable images")));
        }
        classes.push(name);
    }

    let manifest = DatasetManifest::new(classes, records, SplitPolicy::default())?;
    Ok((manifest, report))
}
