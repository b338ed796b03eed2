//! Pipeline configuration: an INI-style `key = value` file with section
//! headers, overridable by `--set section.key=value`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::augment::{AugmentConfig, Transform};
use crate::dataset::{SplitPolicy, SynthSpec};
use crate::extractor::DEFAULT_EXTRACTOR_SEED;
use crate::trainer::TrainingConfig;

/// Keys accepted in the config file, as `section.key`.
pub const KNOWN_KEYS: &[&str] = &[
    "run.seed",
    "run.out",
    "dataset.source",
    "dataset.root",
    "synth.classes",
    "synth.core_per_class",
    "synth.width",
    "synth.height",
    "augment.transforms",
    "augment.shear_factor",
    "augment.fill",
    "augment.width",
    "augment.height",
    "split.policy",
    "split.test_per_class",
    "extractor.kind",
    "extractor.seed",
    "extractor.import",
    "train.steps",
    "train.batch_size",
    "train.learning_rate",
    "train.val_fraction",
    "train.eval_interval",
    "evaluate.predictions",
];

/// Per-stage offsets mixed into the run seed by XOR.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Synth = 1,
    Split = 2,
    Train = 3,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Directory(PathBuf),
    Synth(SynthSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExtractorChoice {
    Reference { seed: u64 },
    Import { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub source: DatasetSource,
    pub augment: AugmentConfig,
    pub split_policy: SplitPolicy,
    pub test_per_class: usize,
    pub extractor: ExtractorChoice,
    pub training: TrainingConfig,
    pub predictions: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn stage_seed(&self, stage: Stage) -> u64 {
        self.seed ^ stage as u64
    }
}

/// Flat `section.key -> value` map.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    /// Directory relative paths in the file are resolved against.
    base: PathBuf,
}

impl RawConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let ini = Ini::load_from_file(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut raw = RawConfig {
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            ..Default::default()
        };
        for (section, props) in ini.iter() {
            for (key, value) in props.iter() {
                let full = match section {
                    Some(s) => format!("{s}.{key}"),
                    None => key.to_string(),
                };
                raw.insert(&full, value)?;
            }
        }
        Ok(raw)
    }

    pub fn insert(&mut self, key: &str, value: &str) -> Result<(), String> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(format!("unknown config key `{key}`"));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Applies a `section.key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), String> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| format!("override `{assignment}` is not of the form key=value"))?;
        self.insert(k.trim(), v)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T>(&self, key: &str, default: T) -> Result<T, String>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| format!("{key} = {v:?}: {e}")),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| {
            let p = PathBuf::from(v);
            if p.is_relative() {
                self.base.join(p)
            } else {
                p
            }
        })
    }

    /// Validates and fills defaults. Defaults follow the published protocol:
    /// 120 test records per class, 4000 steps, batches of 10.
    pub fn resolve(&self) -> Result<PipelineConfig, String> {
        let seed = self.parse("run.seed", 0u64)?;
        let out_dir = self.path("run.out").unwrap_or_else(|| PathBuf::from("out"));

        let source = match self.get("dataset.source").unwrap_or("directory") {
            "directory" => DatasetSource::Directory(
                self.path("dataset.root")
                    .ok_or("dataset.root is required when dataset.source = directory")?,
            ),
            "synth" => {
                let spec = SynthSpec {
                    classes: self.parse("synth.classes", 5)?,
                    core_per_class: self.parse("synth.core_per_class", 30)?,
                    width: self.parse("synth.width", 160)?,
                    height: self.parse("synth.height", 120)?,
                };
                spec.validate().map_err(|e| e.to_string())?;
                DatasetSource::Synth(spec)
            }
            other => return Err(format!("dataset.source must be `directory` or `synth`, got `{other}`")),
        };

        let defaults = AugmentConfig::default();
        let transforms = match self.get("augment.transforms") {
            None => defaults.transforms.clone(),
            Some(list) => list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<Transform>().map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?,
        };
        let fill = match self.get("augment.fill") {
            None => defaults.fill,
            Some(v) => {
                let parts: Vec<u8> = v
                    .split(',')
                    .map(|p| p.trim().parse::<u8>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| format!("augment.fill = {v:?}: {e}"))?;
                <[u8; 3]>::try_from(parts)
                    .map_err(|_| format!("augment.fill = {v:?}: expected three bytes r,g,b"))?
            }
        };
        let augment = AugmentConfig {
            transforms,
            shear_factor: self.parse("augment.shear_factor", defaults.shear_factor)?,
            fill,
            target_width: self.parse("augment.width", defaults.target_width)?,
            target_height: self.parse("augment.height", defaults.target_height)?,
        };
        augment.validate().map_err(|e| e.to_string())?;

        let extractor = match self.get("extractor.kind").unwrap_or("reference") {
            "reference" => ExtractorChoice::Reference {
                seed: self.parse("extractor.seed", DEFAULT_EXTRACTOR_SEED)?,
            },
            "import" => ExtractorChoice::Import {
                path: self
                    .path("extractor.import")
                    .ok_or("extractor.import is required when extractor.kind = import")?,
            },
            other => return Err(format!("extractor.kind must be `reference` or `import`, got `{other}`")),
        };

        let t = TrainingConfig::default();
        let training = TrainingConfig {
            steps: self.parse("train.steps", t.steps)?,
            batch_size: self.parse("train.batch_size", t.batch_size)?,
            learning_rate: self.parse("train.learning_rate", t.learning_rate)?,
            seed: 0,
            val_fraction: self.parse("train.val_fraction", t.val_fraction)?,
            eval_interval: self.parse("train.eval_interval", t.eval_interval)?,
        };
        training.validate().map_err(|e| e.to_string())?;

        let split_policy = self
            .parse("split.policy", SplitPolicy::default())?;
        let mut config = PipelineConfig {
            seed,
            out_dir,
            source,
            augment,
            split_policy,
            test_per_class: self.parse("split.test_per_class", 120)?,
            extractor,
            training,
            predictions: self.path("evaluate.predictions"),
        };
        config.training.seed = config.stage_seed(Stage::Train);
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_published_protocol() {
        let mut raw = RawConfig::default();
        raw.apply_override("dataset.root=data").unwrap();
        let c = raw.resolve().unwrap();
        assert_eq!(c.test_per_class, 120);
        assert_eq!(c.training.steps, 4000);
        assert_eq!(c.training.batch_size, 10);
        assert_eq!(c.training.learning_rate, 0.01);
        assert_eq!((c.augment.target_width, c.augment.target_height), (200, 150));
        assert_eq!(c.split_policy, SplitPolicy::ByCoreImage);
        assert_eq!(c.extractor, ExtractorChoice::Reference { seed: 42 });
    }

    #[test]
    fn file_parsing_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ini");
        std::fs::write(
            &path,
            "[run]\nseed = 9\nout = results\n\n[dataset]\nsource = synth\n\n[synth]\nclasses = 3\n\n\
             [augment]\ntransforms = flip_h, shear\nfill = 1,2,3\n\n[train]\nsteps = 50\n",
        )
        .unwrap();
        let mut raw = RawConfig::load(&path).unwrap();
        raw.apply_override("train.steps=0").unwrap();
        let c = raw.resolve().unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.out_dir, dir.path().join("results"));
        assert!(matches!(c.source, DatasetSource::Synth(SynthSpec { classes: 3, .. })));
        assert_eq!(c.augment.transforms, [Transform::FlipH, Transform::Shear]);
        assert_eq!(c.augment.fill, [1, 2, 3]);
        assert_eq!(c.training.steps, 0);
        assert_eq!(c.training.seed, 9 ^ 3);
    }

    #[test]
    fn rejects_bad_input() {
        let mut raw = RawConfig::default();
        assert!(raw.apply_override("train.stepz=3").is_err());
        assert!(raw.apply_override("no_equals").is_err());
        assert!(raw.resolve().is_err(), "dataset.root missing");
        raw.apply_override("dataset.root=x").unwrap();
        raw.apply_override("train.batch_size=0").unwrap();
        assert!(raw.resolve().is_err());
    }
}
