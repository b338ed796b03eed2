//! Transfer-learning toolkit for image classification by final-layer
//! retraining.
//!
//! The pipeline runs in stages:
//!
//! 1. [`dataset`] ingests a `root/<class>/<image>` corpus (or generates a
//!    synthetic one) into a [`DatasetManifest`](dataset::DatasetManifest).
//! 2. [`augment`] expands every core image into the original plus five
//!    geometric variants, all resized to a common resolution.
//! 3. [`extractor`] turns images into frozen bottleneck vectors and caches
//!    them in a single binary store.
//! 4. [`trainer`] fits a softmax layer on cached vectors with minibatch SGD.
//! 5. [`metrics`] tallies a confusion matrix and derives per-class
//!    precision, recall and F-measure.
//!
//! The [`cli`] module wires these together behind the `retrain` binary.

pub mod augment;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod extractor;
pub mod hash;
pub mod metrics;
pub mod trainer;

pub use error::{Error, Result};

// The guide's code blocks run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/augmentation.md")]
    mod augmentation {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
