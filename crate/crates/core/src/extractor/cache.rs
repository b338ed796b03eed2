//! Single-file bottleneck store.
//!
//! Layout (little-endian): magic `BNKF`, `u32` version (1), `u32` dim,
//! `u32` record count, then per record a `u16` key length, the UTF-8 key
//! `<image sha256 hex>:<extractor digest hex>` and `dim` `f32` values.
//! The same layout is accepted by [`import_bottlenecks`](super::import_bottlenecks).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{FeatureExtractor, FeatureVector};
use crate::augment::Image;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"BNKF";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CacheKey {
    pub image_hash: String,
    pub extractor_digest: String,
}

impl CacheKey {
    pub fn new(image_hash: impl Into<String>, extractor_digest: impl Into<String>) -> Self {
        CacheKey {
            image_hash: image_hash.into(),
            extractor_digest: extractor_digest.into(),
        }
    }

    pub fn encode(&self) -> String {
        format!("{}:{}", self.image_hash, self.extractor_digest)
    }

    pub fn parse(s: &str) -> Option<Self> {
        let (image, digest) = s.split_once(':')?;
        if image.is_empty() || digest.is_empty() || digest.contains(':') {
            return None;
        }
        Some(CacheKey::new(image, digest))
    }
}

/// Parsed store contents: dim plus records in file order.
pub(crate) struct StoreContents {
    pub dim: usize,
    pub records: Vec<(CacheKey, Vec<f32>)>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format!(
                "truncated: needed {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            )),
        }
    }

    fn u16(&mut self) -> std::result::Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub(crate) fn decode_store(bytes: &[u8]) -> std::result::Result<StoreContents, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| "missing magic".to_string())? != MAGIC {
        return Err("bad magic (expected BNKF)".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let dim = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        let key_len = r.u16()? as usize;
        let key = std::str::from_utf8(r.take(key_len)?)
            .map_err(|_| format!("record {i}: key is not UTF-8"))?;
        let key = CacheKey::parse(key)
            .ok_or_else(|| format!("record {i}: malformed key {key:?}"))?;
        let values = r
            .take(dim * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push((key, values));
    }
    if r.pos != bytes.len() {
        return Err(format!(
            "{} trailing bytes after {count} records of dim {dim}",
            bytes.len() - r.pos
        ));
    }
    Ok(StoreContents { dim, records })
}

pub(crate) fn encode_store<'a>(
    dim: usize,
    records: impl ExactSizeIterator<Item = (&'a CacheKey, &'a [f32])>,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + records.len() * (140 + dim * 4));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for (key, values) in records {
        let key = key.encode();
        out.extend_from_slice(&(key.len() as u16).to_le_bytes());
        out.extend_from_slice(key.as_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Write-once map from (image hash, extractor digest) to feature vector,
/// optionally backed by a file. All entries share one dimension.
#[derive(Debug, Default)]
pub struct BottleneckCache {
    path: Option<PathBuf>,
    dim: Option<usize>,
    entries: BTreeMap<CacheKey, FeatureVector>,
    hits: usize,
    misses: usize,
}

impl BottleneckCache {
    pub fn in_memory() -> Self {
        BottleneckCache::default()
    }

    /// Opens the store at `path`, or starts an empty one if it does not exist.
    pub fn open(path: &Path) -> Result<Self> {
        let mut cache = BottleneckCache {
            path: Some(path.to_path_buf()),
            ..Default::default()
        };
        if !path.exists() {
            return Ok(cache);
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let corrupt = |message: String| Error::CorruptCache {
            path: path.to_path_buf(),
            message,
        };
        let contents = decode_store(&bytes).map_err(corrupt)?;
        for (key, values) in contents.records {
            let v = FeatureVector::new(values).map_err(|e| corrupt(e.to_string()))?;
            cache.insert(key, v).map_err(|e| corrupt(e.to_string()))?;
        }
        if cache.dim.is_none() && contents.dim > 0 {
            cache.dim = Some(contents.dim);
        }
        Ok(cache)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn hits(&self) -> usize {
        self.hits
    }

    pub fn misses(&self) -> usize {
        self.misses
    }

    pub fn get(&self, key: &CacheKey) -> Option<&FeatureVector> {
        self.entries.get(key)
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&CacheKey, &FeatureVector)> {
        self.entries.iter()
    }

    /// Stores a vector. Re-inserting an identical vector is a no-op; a
    /// different vector under an existing key is rejected.
    pub fn insert(&mut self, key: CacheKey, value: FeatureVector) -> Result<()> {
        match self.dim {
            Some(d) if d != value.dim() => {
                return Err(Error::Shape(format!(
                    "cache holds {d}-dim vectors, got {} for {}",
                    value.dim(),
                    key.encode()
                )))
            }
            None => self.dim = Some(value.dim()),
            _ => {}
        }
        if let Some(existing) = self.entries.get(&key) {
            if existing.values().iter().map(|v| v.to_bits()).ne(value.values().iter().map(|v| v.to_bits())) {
                return Err(Error::Dataset(format!(
                    "cache key {} already holds a different vector",
                    key.encode()
                )));
            }
            return Ok(());
        }
        self.entries.insert(key, value);
        Ok(())
    }

    /// Returns the cached vector for `image_hash`, computing and storing it
    /// on a miss.
    pub fn lookup_or_compute(
        &mut self,
        image_hash: &str,
        img: &Image,
        extractor: &dyn FeatureExtractor,
    ) -> Result<FeatureVector> {
        let key = CacheKey::new(image_hash, &extractor.identity().weights_digest);
        if let Some(v) = self.entries.get(&key) {
            self.hits += 1;
            return Ok(v.clone());
        }
        self.misses += 1;
        let v = extractor.extract(img)?;
        self.insert(key, v.clone())?;
        Ok(v)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_store(
            self.dim.unwrap_or(0),
            self.entries.iter().map(|(k, v)| (k, v.values())),
        )
    }

    /// Persists atomically: the store is written to a sibling temp file and
    /// renamed over the target.
    pub fn save(&self) -> Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let tmp = path.with_extension("tmp");
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        };
        write().map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PopulateStats {
    pub hits: usize,
    pub computed: usize,
}

/// Ensures every `(image_hash, path)` has a vector for `extractor`. Misses
/// are decoded and extracted in parallel, then inserted in input order.
pub fn populate(
    cache: &mut BottleneckCache,
    images: &[(String, PathBuf)],
    extractor: &dyn FeatureExtractor,
) -> Result<PopulateStats> {
    let digest = &extractor.identity().weights_digest;
    let mut stats = PopulateStats::default();
    let mut todo: Vec<&(String, PathBuf)> = Vec::new();
    let mut queued = std::collections::HashSet::new();
    for item in images {
        let key = CacheKey::new(&item.0, digest);
        if cache.contains(&key) {
            stats.hits += 1;
            cache.hits += 1;
        } else if queued.insert(item.0.as_str()) {
            todo.push(item);
        }
    }
    let computed: Vec<(CacheKey, FeatureVector)> = todo
        .par_iter()
        .map(|(hash, path)| {
            let img = Image::open(path)?;
            Ok((CacheKey::new(hash, digest), extractor.extract(&img)?))
        })
        .collect::<Result<_>>()?;
    stats.computed = computed.len();
    cache.misses += computed.len();
    for (key, v) in computed {
        cache.insert(key, v)?;
    }
    Ok(stats)
}
