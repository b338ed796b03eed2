use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetManifest, SampleRecord, Split, SplitPolicy};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitReport {
    /// Indexed by class label.
    pub per_class: Vec<SplitCounts>,
}

impl SplitReport {
    pub fn totals(&self) -> SplitCounts {
        self.per_class.iter().fold(SplitCounts::default(), |acc, c| SplitCounts {
            train: acc.train + c.train,
            validation: acc.validation + c.validation,
            test: acc.test + c.test,
        })
    }
}

/// Assigns every record to train, validation or test.
///
/// Per class, sampling units are shuffled with a `seed`-keyed PRNG and drawn
/// into the test split until it holds at least `test_per_class` records. A
/// unit is a single record under [`SplitPolicy::AfterAugment`] and the whole
/// group of records sharing a core image under [`SplitPolicy::ByCoreImage`],
/// so the latter never leaks variants of one photo across splits. A
/// `val_fraction` share of the remaining units (rounded) becomes validation.
pub fn split(
    manifest: &DatasetManifest,
    policy: SplitPolicy,
    test_per_class: usize,
    val_fraction: f64,
    seed: u64,
) -> Result<(DatasetManifest, SplitReport)> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::Config(format!(
            "val_fraction must be in [0, 1), got {val_fraction}"
        )));
    }
    let k = manifest.num_classes();
    let counts = manifest.class_counts();
    let shortfalls: Vec<String> = counts
        .iter()
        .enumerate()
        .filter(|(_, &n)| n < test_per_class)
        .map(|(c, &n)| {
            format!(
                "{}: has {n}, needs {test_per_class} (short by {})",
                manifest.classes()[c],
                test_per_class - n
            )
        })
        .collect();
    if !shortfalls.is_empty() {
        return Err(Error::InsufficientSamples(shortfalls.join("; ")));
    }

    // units[class] = list of record-index groups, in a canonical order.
    let mut units: Vec<Vec<Vec<usize>>> = vec![Vec::new(); k];
    match policy {
        SplitPolicy::ByCoreImage => {
            let mut groups: Vec<BTreeMap<&str, Vec<usize>>> = vec![BTreeMap::new(); k];
            for (i, r) in manifest.records().iter().enumerate() {
                groups[r.label].entry(r.core_id.as_str()).or_default().push(i);
            }
            for (c, g) in groups.into_iter().enumerate() {
                units[c] = g.into_values().collect();
            }
        }
        SplitPolicy::AfterAugment => {
            let mut order: Vec<usize> = (0..manifest.records().len()).collect();
            order.sort_by(|&a, &b| manifest.records()[a].path.cmp(&manifest.records()[b].path));
            for i in order {
                units[manifest.records()[i].label].push(vec![i]);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![Split::Train; manifest.records().len()];
    let mut per_class = vec![SplitCounts::default(); k];
    for (c, class_units) in units.iter_mut().enumerate() {
        class_units.shuffle(&mut rng);
        let mut taken = 0;
        let mut n_test_units = 0;
        while taken < test_per_class {
            taken += class_units[n_test_units].len();
            n_test_units += 1;
        }
        let remaining = class_units.len() - n_test_units;
        let n_val_units = (val_fraction * remaining as f64).round() as usize;
        for (u, group) in class_units.iter().enumerate() {
            let s = if u < n_test_units {
                Split::Test
            } else if u < n_test_units + n_val_units {
                Split::Validation
            } else {
                Split::Train
            };
            for &i in group {
                assignment[i] = s;
                match s {
                    Split::Test => per_class[c].test += 1,
                    Split::Validation => per_class[c].validation += 1,
                    _ => per_class[c].train += 1,
                }
            }
        }
    }

    let records: Vec<SampleRecord> = manifest
        .records()
        .iter()
        .zip(assignment)
        .map(|(r, split)| SampleRecord { split, ..r.clone() })
        .collect();
    Ok((manifest.with_records(records, policy), SplitReport { per_class }))
}
