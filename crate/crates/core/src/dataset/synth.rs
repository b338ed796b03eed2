use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{DatasetManifest, SampleRecord, Split, SplitPolicy, Variant};
use crate::augment::Image;
use crate::error::{Error, Result};
use crate::hash::sha256_hex;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthSpec {
    pub classes: usize,
    pub core_per_class: usize,
    pub width: u32,
    pub height: u32,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config(format!(
                "synthetic dataset needs at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.core_per_class < 1 {
            return Err(Error::Config("core_per_class must be at least 1".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("synthetic image size must be positive".into()));
        }
        Ok(())
    }

    pub fn class_name(&self, class: usize) -> String {
        let digits = (self.classes - 1).to_string().len().max(2);
        format!("class_{class:0digits$}")
    }
}

/// Class color: evenly spaced hues at fixed saturation and value.
fn class_color(class: usize, classes: usize) -> [f64; 3] {
    let h = class as f64 / classes as f64 * 6.0;
    let (s, v) = (0.8, 0.85);
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0]
}

/// One synthetic image: class-colored background, a class-specific stripe
/// texture (orientation and period vary with the class) and seeded noise.
fn render(spec: &SynthSpec, class: usize, index: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((class * spec.core_per_class + index) as u64);

    let base = class_color(class, spec.classes);
    let angle = std::f64::consts::PI * class as f64 / spec.classes as f64;
    let (dir_y, dir_x) = angle.sin_cos();
    let period = 6.0 + 3.0 * class as f64;
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let brightness: f64 = rng.random_range(-20.0..20.0);

    let mut pixels = Vec::with_capacity(spec.width as usize * spec.height as usize * 3);
    for y in 0..spec.height {
        for x in 0..spec.width {
            let t = (x as f64 * dir_x + y as f64 * dir_y) / period * std::f64::consts::TAU;
            let stripe = 30.0 * (t + phase).sin();
            for ch in base {
                let noise: f64 = rng.random_range(-25.0..25.0);
                pixels.push((ch + stripe + brightness + noise).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Image::new(spec.width, spec.height, pixels).expect("valid by construction")
}

/// Writes `classes × core_per_class` PNG images under
/// `out_dir/class_NN/img_NNNN.png` and returns a manifest over them. Output
/// is a pure function of `(spec, seed)`.
pub fn synth_generate(spec: &SynthSpec, seed: u64, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    for c in 0..spec.classes {
        let dir = out_dir.join(spec.class_name(c));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let jobs: Vec<(usize, usize)> = (0..spec.classes)
        .flat_map(|c| (0..spec.core_per_class).map(move |i| (c, i)))
        .collect();
    let records = jobs
        .into_par_iter()
        .map(|(class, index)| {
            let bytes = render(spec, class, index, seed).encode_png();
            let path = out_dir
                .join(spec.class_name(class))
                .join(format!("img_{index:04}.png"));
            fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            Ok(SampleRecord {
                path,
                label: class,
                core_id: sha256_hex(&bytes),
                variant: Variant::Original,
                split: Split::Unassigned,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let classes = (0..spec.classes).map(|c| spec.class_name(c)).collect();
    DatasetManifest::new(classes, records, SplitPolicy::default())
}
