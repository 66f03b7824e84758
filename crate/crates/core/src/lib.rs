//! A-PixelHop: a small-model fake-image detector.
//!
//! The pipeline selects edge/texture blocks from an image, extracts
//! spatial-spectral responses with parallel Saab filter banks, scores each
//! block with per-channel boosted-tree classifiers, and fuses the most
//! confident block decisions from both ends of the score distribution into
//! an image-level verdict.

pub mod blocks;
pub mod channelsel;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod gbdt;
pub mod metrics;
pub mod model;
pub mod saab;
pub mod seeds;
pub mod synthgen;

pub use error::{Error, Result};
