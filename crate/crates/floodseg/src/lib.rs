//! Floodwater detection in road-scene photographs.
//!
//! This crate wraps the algorithms of [`floodseg_core`] with everything that
//! needs an operating system: PNG/JPEG decoding, binary mask files, the
//! embedding CSV format, dataset manifests, the classification and
//! segmentation pipelines, JSON reports and model files, and a synthetic
//! dataset generator.

pub mod config;
pub mod embeddings;
mod error;
pub mod io;
pub mod manifest;
pub mod overlay;
pub mod pipeline;
pub mod reference;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
pub use floodseg_core as core;
