#![allow(dead_code)]

pub mod oracle;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retrain::augment::Image;
use retrain::cli::{PipelineConfig, RawConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, max_side: u32) -> Image {
    let w = rng.random_range(1..=max_side);
    let h = rng.random_range(1..=max_side);
    let pixels = (0..w * h * 3).map(|_| rng.random()).collect();
    Image::new(w, h, pixels).unwrap()
}

/// Published confusion matrix: rows actual, columns predicted.
pub const TABLE2_CLASSES: [&str; 5] = ["Nouka Baich", "Danguli", "Kabadi", "Kanamachi", "Latthi khela"];
pub const TABLE2: [[u64; 5]; 5] = [
    [101, 0, 10, 2, 7],
    [2, 97, 5, 12, 4],
    [4, 1, 87, 22, 6],
    [4, 5, 16, 91, 4],
    [6, 1, 22, 2, 89],
];

pub fn table2_names() -> Vec<String> {
    TABLE2_CLASSES.iter().map(|s| s.to_string()).collect()
}

pub fn table2_rows() -> Vec<Vec<u64>> {
    TABLE2.iter().map(|r| r.to_vec()).collect()
}

/// Expands the matrix into (actual, predicted) label pairs.
pub fn table2_pairs() -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (a, row) in TABLE2.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            out.extend(std::iter::repeat_n((a, p), n as usize));
        }
    }
    out
}

/// A synthetic-data pipeline config writing under `out`.
pub fn synth_config(out: &Path, settings: &[(&str, &str)]) -> PipelineConfig {
    let mut raw = RawConfig::default();
    raw.insert("dataset.source", "synth").unwrap();
    raw.insert("run.out", out.to_str().unwrap()).unwrap();
    for (k, v) in settings {
        raw.insert(k, v).unwrap();
    }
    raw.resolve().unwrap()
}

/// A small, fast synthetic configuration for tests that exercise plumbing
/// rather than accuracy.
pub fn tiny_config(out: &Path, seed: u64) -> PipelineConfig {
    synth_config(
        out,
        &[
            ("run.seed", &seed.to_string()),
            ("synth.classes", "3"),
            ("synth.core_per_class", "4"),
            ("synth.width", "48"),
            ("synth.height", "36"),
            ("augment.width", "40"),
            ("augment.height", "32"),
            ("split.test_per_class", "6"),
            ("train.steps", "50"),
            ("train.batch_size", "4"),
        ],
    )
}
