//! Deterministic geometric augmentation and resizing.

mod image;
mod resize;
mod transform;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use self::image::Image;
pub use resize::resize;
pub use transform::{
    apply_transform, flip_h, rot_plus90, rotate, shear, AugmentSpec, Interpolation, Transform,
    DEFAULT_SHEAR_FACTOR,
};

use crate::dataset::{DatasetManifest, SampleRecord, Variant};
use crate::error::{Error, Result};

pub const DEFAULT_TARGET_WIDTH: u32 = 200;
pub const DEFAULT_TARGET_HEIGHT: u32 = 150;

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentConfig {
    pub transforms: Vec<Transform>,
    pub shear_factor: f64,
    pub fill: [u8; 3],
    pub target_width: u32,
    pub target_height: u32,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            transforms: Transform::ALL.to_vec(),
            shear_factor: DEFAULT_SHEAR_FACTOR,
            fill: [0, 0, 0],
            target_width: DEFAULT_TARGET_WIDTH,
            target_height: DEFAULT_TARGET_HEIGHT,
        }
    }
}

impl AugmentConfig {
    pub fn spec(&self, transform: Transform) -> AugmentSpec {
        AugmentSpec {
            transform,
            shear_factor: self.shear_factor,
            fill: self.fill,
            interpolation: Interpolation::Bilinear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_width == 0 || self.target_height == 0 {
            return Err(Error::Config("augment target size must be positive".into()));
        }
        for (i, t) in self.transforms.iter().enumerate() {
            if self.transforms[..i].contains(t) {
                return Err(Error::Config(format!("transform `{t}` listed twice")));
            }
        }
        self.spec(Transform::Shear).validate()
    }
}

/// The original plus one image per configured transform, each resized to
/// the target resolution.
pub fn expand(img: &Image, config: &AugmentConfig) -> Result<Vec<(Variant, Image)>> {
    let mut out = Vec::with_capacity(config.transforms.len() + 1);
    out.push((
        Variant::Original,
        resize(img, config.target_width, config.target_height)?,
    ));
    for &t in &config.transforms {
        let transformed = apply_transform(img, &config.spec(t))?;
        out.push((
            Variant::Transformed(t),
            resize(&transformed, config.target_width, config.target_height)?,
        ));
    }
    Ok(out)
}

fn remove_all(paths: &[PathBuf]) {
    for p in paths {
        let _ = fs::remove_file(p);
    }
}

fn augment_one(
    record: &SampleRecord,
    class_name: &str,
    config: &AugmentConfig,
    out_dir: &Path,
) -> Result<Vec<SampleRecord>> {
    let img = Image::open(&record.path)?;
    let dir = out_dir.join(class_name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut written = Vec::new();
    let mut records = Vec::new();
    for (variant, image) in expand(&img, config)? {
        let path = dir.join(format!("{}_{}.png", record.core_id, variant));
        if let Err(e) = fs::write(&path, image.encode_png()) {
            remove_all(&written);
            return Err(Error::io(&path, e));
        }
        written.push(path.clone());
        records.push(SampleRecord {
            path,
            variant,
            ..record.clone()
        });
    }
    Ok(records)
}

/// Expands every original record into `1 + transforms.len()` PNGs under
/// `out_dir/<class>/<core_id>_<variant>.png`. Labels, core ids and split tags
/// carry over. On failure, every file written by this call is removed.
pub fn augment_dataset(
    manifest: &DatasetManifest,
    config: &AugmentConfig,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    config.validate()?;
    if let Some(r) = manifest.records().iter().find(|r| r.variant != Variant::Original) {
        return Err(Error::Dataset(format!(
            "augmentation input must contain only originals; {} is `{}`",
            r.path.display(),
            r.variant
        )));
    }
    let results: Vec<Result<Vec<SampleRecord>>> = manifest
        .records()
        .par_iter()
        .map(|r| augment_one(r, &manifest.classes()[r.label], config, out_dir))
        .collect();

    if let Some(pos) = results.iter().position(|r| r.is_err()) {
        for produced in results.iter().flatten() {
            remove_all(&produced.iter().map(|r| r.path.clone()).collect::<Vec<_>>());
        }
        let err = results.into_iter().nth(pos).unwrap().unwrap_err();
        return Err(err);
    }
    let records = results.into_iter().flat_map(|r| r.unwrap()).collect();
    DatasetManifest::new(manifest.classes().to_vec(), records, manifest.split_policy())
}
