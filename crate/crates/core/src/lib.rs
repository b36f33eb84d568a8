//! Android APK → bytecode images, extracted text and annotation prompts,
//! split dataset manifests, and a binary classification metric suite.
//!
//! The pipeline stages are independent modules:
//!
//! - [`apk`]: ZIP container access and code-byte collection
//! - [`axml`]: binary `AndroidManifest.xml` decoding
//! - [`image`]: byte sequence → grayscale/RGB images at 128/256/512
//! - [`text`]: string/permission evidence, prompt instances, annotators
//! - [`dataset`]: labeled manifests and stratified train/val/test splits
//! - [`metrics`]: confusion matrix, precision/recall/F1, ROC-AUC
//! - [`baseline`]: logistic-regression classifier over pooled image features
//! - [`cli`]: the `apkmm` batch driver
//!
//! [`fixtures`] generates reference-encoded manifests and synthetic APKs.

pub mod apk;
pub mod axml;
pub mod baseline;
pub mod cli;
pub mod dataset;
pub mod fixtures;
pub mod image;
pub mod label;
pub mod metrics;
pub mod rng;
pub mod text;

pub use label::Label;
