use std::collections::HashSet;
use std::fs;
use std::path::Path;

use log::warn;
use rayon::prelude::*;

use super::cache::decode_store;
use super::{BottleneckCache, ExtractorIdentity, FeatureVector};
use crate::dataset::DatasetManifest;
use crate::error::{Error, Result};
use crate::hash::sha256_hex;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImportReport {
    /// `None` when the file holds no records.
    pub identity: Option<ExtractorIdentity>,
    pub inserted: usize,
    pub skipped: Vec<String>,
}

pub const EXTERNAL_NAME: &str = "external";

/// Loads externally computed bottlenecks (same layout as the cache store)
/// into `cache`. The whole file is validated before anything is inserted;
/// records for images absent from `manifest` are skipped with a warning.
pub fn import_bottlenecks(
    file: &Path,
    manifest: &DatasetManifest,
    cache: &mut BottleneckCache,
) -> Result<ImportReport> {
    let bytes = fs::read(file).map_err(|e| Error::io(file, e))?;
    let contents = decode_store(&bytes)
        .map_err(|m| Error::BottleneckFormat(format!("{}: {m}", file.display())))?;

    let digests: HashSet<&str> = contents
        .records
        .iter()
        .map(|(k, _)| k.extractor_digest.as_str())
        .collect();
    if digests.len() > 1 {
        return Err(Error::BottleneckFormat(format!(
            "{}: records from {} different extractors",
            file.display(),
            digests.len()
        )));
    }
    if let Some(d) = cache.dim() {
        if !contents.records.is_empty() && d != contents.dim {
            return Err(Error::Shape(format!(
                "cache holds {d}-dim vectors, import file has dim {}",
                contents.dim
            )));
        }
    }
    let mut vectors = Vec::with_capacity(contents.records.len());
    for (key, values) in contents.records {
        let v = FeatureVector::new(values)
            .map_err(|e| Error::BottleneckFormat(format!("{}: {e}", key.encode())))?;
        vectors.push((key, v));
    }

    let known: HashSet<String> = manifest
        .records()
        .par_iter()
        .map(|r| {
            fs::read(&r.path)
                .map(|b| sha256_hex(&b))
                .map_err(|e| Error::io(&r.path, e))
        })
        .collect::<Result<_>>()?;

    let identity = vectors.first().map(|(k, _)| ExtractorIdentity {
        name: EXTERNAL_NAME.into(),
        version: "1".into(),
        dim: contents.dim,
        weights_digest: k.extractor_digest.clone(),
    });
    let mut report = ImportReport {
        identity,
        inserted: 0,
        skipped: Vec::new(),
    };
    for (key, v) in vectors {
        if !known.contains(&key.image_hash) {
            warn!("skipping bottleneck for unknown image {}", key.image_hash);
            report.skipped.push(key.image_hash);
            continue;
        }
        cache.insert(key, v)?;
        report.inserted += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::Image;
    use crate::dataset::{SampleRecord, Split, SplitPolicy, Variant};
    use crate::extractor::cache::encode_store;
    use crate::extractor::CacheKey;

    fn manifest_with_images(dir: &Path, n: usize) -> (DatasetManifest, Vec<String>) {
        let mut records = Vec::new();
        let mut hashes = Vec::new();
        for i in 0..n {
            let bytes = Image::filled(2, 2, [i as u8, 0, 0]).unwrap().encode_png();
            let path = dir.join(format!("{i}.png"));
            fs::write(&path, &bytes).unwrap();
            let h = sha256_hex(&bytes);
            hashes.push(h.clone());
            records.push(SampleRecord {
                path,
                label: 0,
                core_id: h,
                variant: Variant::Original,
                split: Split::Unassigned,
            });
        }
        let m = DatasetManifest::new(vec!["c".into()], records, SplitPolicy::ByCoreImage).unwrap();
        (m, hashes)
    }

    #[test]
    fn header_only_file_imports_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let (m, _) = manifest_with_images(dir.path(), 1);
        let file = dir.path().join("empty.bnk");
        fs::write(&file, encode_store(2048, std::iter::empty())).unwrap();
        let mut cache = BottleneckCache::in_memory();
        let report = import_bottlenecks(&file, &m, &mut cache).unwrap();
        assert_eq!(report.inserted, 0);
        assert!(report.identity.is_none());
        assert!(cache.is_empty());
    }

    #[test]
    fn unknown_images_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let (m, hashes) = manifest_with_images(dir.path(), 2);
        let keys = [
            CacheKey::new(&hashes[0], "ext"),
            CacheKey::new("f00d", "ext"),
            CacheKey::new(&hashes[1], "ext"),
        ];
        let vals = [vec![1.0f32; 3], vec![2.0; 3], vec![3.0; 3]];
        let file = dir.path().join("f.bnk");
        fs::write(
            &file,
            encode_store(3, keys.iter().zip(vals.iter().map(|v| v.as_slice()))),
        )
        .unwrap();
        let mut cache = BottleneckCache::in_memory();
        let report = import_bottlenecks(&file, &m, &mut cache).unwrap();
        assert_eq!(report.inserted, 2);
        assert_eq!(report.skipped, ["f00d"]);
        let id = report.identity.unwrap();
        assert_eq!((id.name.as_str(), id.dim), ("external", 3));
    }
}
