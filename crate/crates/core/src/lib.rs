//! Allocation-only algorithms for detecting floodwater in road-scene images.
//!
//! Everything in this crate is pure computation over in-memory rasters and
//! feature matrices: colour conversion and resampling, LBP and HOG texture
//! descriptors, SLIC superpixels, three binary classifiers with a k-fold
//! grid search, CRF smoothing of per-pixel probabilities, and the
//! precision / recall / F1 bookkeeping used to score all of it.
//!
//! File formats, image decoding and the command line live in the `floodseg`
//! crate, which builds on this one.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod classifiers;
pub mod crf;
mod error;
pub mod eval;
pub mod features;
pub mod imaging;
mod math;
pub mod superpixels;

pub use error::{Error, Result};
