//! Tooling for localizing and redacting hateful regions in generated images.
//!
//! The pipeline mirrors a dataset-curation flow: cross-attention maps for the
//! hateful prompt tokens are aggregated into a heatmap, thresholded into a
//! binary mask, and the masked region is anonymized with a two-step blur.
//! Predictions are scored with per-instance IoU. A small text-conditioned
//! masker (frozen encoder, skip-injected decoder, FiLM conditioning) can be
//! trained on the result.

pub mod attention;
pub mod error;
pub mod evaluate;
pub mod manifest;
pub mod masker;
pub mod numerics;
pub mod raster;
pub mod redact;
pub mod textproc;

pub use attention::{AttentionStack, Heatmap};
pub use error::{Error, Result};
pub use raster::{BinaryMask, ImageRGB8};
