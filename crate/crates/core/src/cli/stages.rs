use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{DatasetSource, ExtractorChoice, PipelineConfig, Stage};
use super::report::{emit_report, read_predictions, write_predictions, Prediction};
use super::CliError;
use crate::augment::augment_dataset;
use crate::dataset::{self, DatasetManifest, Split};
use crate::error::Error;
use crate::extractor::{
    import_bottlenecks, populate, BottleneckCache, CacheKey, ExtractorIdentity, FeatureExtractor,
    ReferenceExtractor,
};
use crate::hash::sha256_hex;
use crate::metrics::{build_confusion, class_metrics, ConfusionMatrix, NamingMode};
use crate::trainer::{self, write_curve, Example, SoftmaxLayer};

/// Fixed file names under the output directory.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub root: PathBuf,
}

impl Artifacts {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Artifacts { root: root.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.tsv")
    }
    pub fn ingest_report(&self) -> PathBuf {
        self.root.join("ingest_report.txt")
    }
    pub fn synth_dir(&self) -> PathBuf {
        self.root.join("synth")
    }
    pub fn augmented_dir(&self) -> PathBuf {
        self.root.join("augmented")
    }
    pub fn augmented_manifest(&self) -> PathBuf {
        self.root.join("augmented.tsv")
    }
    pub fn split_report(&self) -> PathBuf {
        self.root.join("split_report.txt")
    }
    pub fn cache(&self) -> PathBuf {
        self.root.join("bottlenecks.bnk")
    }
    pub fn extractor_info(&self) -> PathBuf {
        self.root.join("extractor.txt")
    }
    pub fn layer(&self) -> PathBuf {
        self.root.join("layer.sftm")
    }
    pub fn curve(&self) -> PathBuf {
        self.root.join("curve.csv")
    }
    pub fn predictions(&self) -> PathBuf {
        self.root.join("predictions.tsv")
    }
    pub fn confusion(&self) -> PathBuf {
        self.root.join("confusion.csv")
    }
    pub fn metrics_text(&self, mode: NamingMode) -> PathBuf {
        self.root.join(format!("metrics_{mode}.txt"))
    }
    pub fn metrics_csv(&self, mode: NamingMode) -> PathBuf {
        self.root.join(format!("metrics_{mode}.csv"))
    }
    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.txt")
    }
}

fn require(path: PathBuf, stage: &'static str) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact { path, stage })
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn prepare(config: &PipelineConfig) -> Result<Artifacts, CliError> {
    let out = &config.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    Ok(Artifacts::new(out))
}

pub fn ingest(config: &PipelineConfig) -> Result<DatasetManifest, CliError> {
    let DatasetSource::Directory(root) = &config.source else {
        return Err(CliError::Validation(
            "`ingest` needs dataset.source = directory".into(),
        ));
    };
    let a = prepare(config)?;
    let (manifest, report) = dataset::ingest(root).map_err(|e| match e {
        Error::Dataset(m) => CliError::Validation(m),
        other => other.into(),
    })?;
    manifest.write(&a.manifest())?;
    let mut text = format!("ingested = {}\nskipped = {}\n", manifest.records().len(), report.skipped.len());
    for s in &report.skipped {
        let _ = writeln!(text, "skip = {}\t{}", s.path.display(), s.reason);
    }
    write_text(&a.ingest_report(), &text)?;
    println!(
        "ingest: {} classes, {} images, {} skipped",
        manifest.num_classes(),
        manifest.records().len(),
        report.skipped.len()
    );
    Ok(manifest)
}

pub fn synth(config: &PipelineConfig) -> Result<DatasetManifest, CliError> {
    let DatasetSource::Synth(spec) = &config.source else {
        return Err(CliError::Validation("`synth` needs dataset.source = synth".into()));
    };
    let a = prepare(config)?;
    let manifest = dataset::synth_generate(spec, config.stage_seed(Stage::Synth), &a.synth_dir())?;
    manifest.write(&a.manifest())?;
    println!(
        "synth: {} classes x {} images written to {}",
        spec.classes,
        spec.core_per_class,
        a.synth_dir().display()
    );
    Ok(manifest)
}

pub fn augment(config: &PipelineConfig) -> Result<DatasetManifest, CliError> {
    let a = prepare(config)?;
    let source = require(a.manifest(), "ingest` or `synth")?;
    let manifest = DatasetManifest::read(&source)?;
    let augmented = augment_dataset(&manifest, &config.augment, &a.augmented_dir())?;
    let (split, report) = dataset::split(
        &augmented,
        config.split_policy,
        config.test_per_class,
        config.training.val_fraction,
        config.stage_seed(Stage::Split),
    )
    .map_err(|e| match e {
        Error::InsufficientSamples(m) => CliError::Validation(format!("cannot split: {m}")),
        other => other.into(),
    })?;
    split.write(&a.augmented_manifest())?;

    let mut text = format!("policy = {}\n", config.split_policy);
    for (name, c) in split.classes().iter().zip(&report.per_class) {
        let _ = writeln!(text, "{name} = train {} validation {} test {}", c.train, c.validation, c.test);
    }
    let t = report.totals();
    let _ = writeln!(text, "total = train {} validation {} test {}", t.train, t.validation, t.test);
    write_text(&a.split_report(), &text)?;
    println!(
        "augment: {} -> {} images; split train {} / validation {} / test {}",
        manifest.records().len(),
        split.records().len(),
        t.train,
        t.validation,
        t.test
    );
    Ok(split)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractOutcome {
    pub identity: ExtractorIdentity,
    pub images: usize,
    pub computed: usize,
    pub hits: usize,
}

fn file_hashes(manifest: &DatasetManifest) -> Result<Vec<(String, PathBuf)>, CliError> {
    manifest
        .records()
        .par_iter()
        .map(|r| {
            let bytes = fs::read(&r.path).map_err(|e| Error::io(&r.path, e))?;
            Ok((sha256_hex(&bytes), r.path.clone()))
        })
        .collect()
}

fn write_identity(path: &Path, id: &ExtractorIdentity) -> Result<(), CliError> {
    write_text(
        path,
        &format!(
            "name = {}\nversion = {}\ndim = {}\nweights_digest = {}\n",
            id.name, id.version, id.dim, id.weights_digest
        ),
    )
}

fn read_identity(path: &Path) -> Result<ExtractorIdentity, CliError> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let field = |key: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(key)?.trim_start().strip_prefix('='))
            .map(|v| v.trim().to_string())
            .ok_or_else(|| CliError::Runtime(Error::Config(format!("{} lacks `{key}`", path.display()))))
    };
    Ok(ExtractorIdentity {
        name: field("name")?,
        version: field("version")?,
        dim: field("dim")?
            .parse()
            .map_err(|_| CliError::Runtime(Error::Config(format!("{}: bad dim", path.display()))))?,
        weights_digest: field("weights_digest")?,
    })
}

pub fn extract(config: &PipelineConfig) -> Result<ExtractOutcome, CliError> {
    let a = prepare(config)?;
    let manifest = DatasetManifest::read(&require(a.augmented_manifest(), "augment")?)?;
    let mut cache = BottleneckCache::open(&a.cache())?;
    let outcome = match &config.extractor {
        ExtractorChoice::Reference { seed } => {
            let extractor = ReferenceExtractor::new(
                *seed,
                config.augment.target_width,
                config.augment.target_height,
            )?;
            let hashes = file_hashes(&manifest)?;
            let stats = populate(&mut cache, &hashes, &extractor)?;
            ExtractOutcome {
                identity: extractor.identity().clone(),
                images: hashes.len(),
                computed: extractor.extract_count(),
                hits: stats.hits,
            }
        }
        ExtractorChoice::Import { path } => {
            let report = import_bottlenecks(path, &manifest, &mut cache)?;
            let identity = report.identity.ok_or_else(|| {
                CliError::Validation(format!("{} contains no bottlenecks", path.display()))
            })?;
            ExtractOutcome {
                identity,
                images: manifest.records().len(),
                computed: 0,
                hits: 0,
            }
        }
    };
    cache.save()?;
    write_identity(&a.extractor_info(), &outcome.identity)?;
    println!(
        "extract: {} images, {} computed, {} cache hits ({} entries in {})",
        outcome.images,
        outcome.computed,
        outcome.hits,
        cache.len(),
        a.cache().display()
    );
    Ok(outcome)
}

type LabeledFeatures = (Split, Example, PathBuf);

/// Loads the split manifest and the cached vector of every record.
fn load_features(
    a: &Artifacts,
) -> Result<(DatasetManifest, Vec<LabeledFeatures>), CliError> {
    let manifest = DatasetManifest::read(&require(a.augmented_manifest(), "augment")?)?;
    let identity = read_identity(&require(a.extractor_info(), "extract")?)?;
    let cache = BottleneckCache::open(&require(a.cache(), "extract")?)?;
    let hashes = file_hashes(&manifest)?;
    let mut out = Vec::with_capacity(hashes.len());
    for (record, (hash, path)) in manifest.records().iter().zip(hashes) {
        let key = CacheKey::new(hash, &identity.weights_digest);
        let Some(v) = cache.get(&key) else {
            return Err(CliError::MissingArtifact {
                path: PathBuf::from(format!("{} (bottleneck for {})", a.cache().display(), path.display())),
                stage: "extract",
            });
        };
        out.push((record.split, Example::new(v.to_f64(), record.label), path));
    }
    Ok((manifest, out))
}

pub fn train(config: &PipelineConfig) -> Result<trainer::TrainingRun, CliError> {
    let a = prepare(config)?;
    let (manifest, features) = load_features(&a)?;
    let pick = |s: Split| -> Vec<Example> {
        features
            .iter()
            .filter(|(split, _, _)| *split == s)
            .map(|(_, e, _)| e.clone())
            .collect()
    };
    let (train_set, val_set) = (pick(Split::Train), pick(Split::Validation));
    let run = trainer::train(&config.training, manifest.num_classes(), &train_set, &val_set)?;
    run.layer.save(&a.layer())?;
    write_curve(&a.curve(), &run.curve)?;
    match run.curve.last() {
        Some(p) => println!(
            "train: {} steps on {} examples; last logged cross-entropy {:.4}, validation accuracy {}",
            config.training.steps,
            train_set.len(),
            p.cross_entropy,
            p.validation_accuracy.map(|v| format!("{:.2}%", v * 100.0)).unwrap_or_else(|| "n/a".into())
        ),
        None => println!("train: 0 steps; layer left at zero initialization"),
    }
    Ok(run)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluateOutcome {
    pub confusion: ConfusionMatrix,
    pub summary: String,
}

pub fn evaluate(config: &PipelineConfig) -> Result<EvaluateOutcome, CliError> {
    let a = prepare(config)?;
    let (class_names, predictions) = match &config.predictions {
        Some(path) => read_predictions(path)?,
        None => {
            let layer = SoftmaxLayer::load(&require(a.layer(), "train")?)?;
            let (manifest, features) = load_features(&a)?;
            let mut preds = Vec::new();
            for (split, ex, path) in &features {
                if *split != Split::Test {
                    continue;
                }
                let predicted = layer.predict(&ex.features)?;
                preds.push(Prediction {
                    path: path.clone(),
                    truth: ex.label,
                    prediction: predicted,
                });
            }
            write_predictions(&a.predictions(), manifest.classes(), &preds, Some(&a.root))?;
            (manifest.classes().to_vec(), preds)
        }
    };
    let truths: Vec<usize> = predictions.iter().map(|p| p.truth).collect();
    let preds: Vec<usize> = predictions.iter().map(|p| p.prediction).collect();
    let cm = build_confusion(&truths, &preds, class_names)?;
    if cm.total() == 0 {
        return Err(CliError::Validation("no test predictions to evaluate".into()));
    }
    cm.write_csv(&a.confusion())?;
    let standard = class_metrics(&cm, NamingMode::Standard);
    for report in [standard.clone(), standard.with_mode(NamingMode::Paper)] {
        write_text(&a.metrics_text(report.naming_mode), &report.to_text())?;
        write_text(&a.metrics_csv(report.naming_mode), &report.to_csv())?;
    }
    let summary = emit_report(&a)?;
    print!("{summary}");
    Ok(EvaluateOutcome {
        confusion: cm,
        summary,
    })
}

pub fn pipeline(config: &PipelineConfig) -> Result<(), CliError> {
    match config.source {
        DatasetSource::Directory(_) => ingest(config).map(drop)?,
        DatasetSource::Synth(_) => synth(config).map(drop)?,
    }
    augment(config)?;
    extract(config)?;
    train(config)?;
    evaluate(config)?;
    Ok(())
}
