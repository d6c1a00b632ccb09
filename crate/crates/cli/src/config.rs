use std::path::Path;

use dehate_core::attention::DEFAULT_TAU;
use dehate_core::masker::{MaskerConfig, DEFAULT_PREDICT_TAU};
use dehate_core::redact::RedactionParams;
use dehate_core::textproc::DEFAULT_WORD_BUDGET;
use serde::{Deserialize, Serialize};

use crate::{Failure, MaskerShape};

pub const DEFAULT_SEED: u64 = 42;

/// Optional overrides loaded from `--config`; flags take precedence, then
/// these values, then module defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tau: Option<f32>,
    pub tau_black: Option<f32>,
    pub tau_avg: Option<f32>,
    pub box_radius: Option<usize>,
    pub word_budget: Option<usize>,
    pub seed: Option<u64>,
    pub predict_tau: Option<f32>,
    pub image_size: Option<usize>,
    pub patch_size: Option<usize>,
    pub embed_dim: Option<usize>,
    pub blocks: Option<usize>,
    pub span_embed_dim: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&raw).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub(crate) fn tau(&self, flag: Option<f32>) -> f32 {
        flag.or(self.tau).unwrap_or(DEFAULT_TAU)
    }

    pub(crate) fn predict_tau(&self, flag: Option<f32>) -> f32 {
        flag.or(self.predict_tau).unwrap_or(DEFAULT_PREDICT_TAU)
    }

    pub(crate) fn word_budget(&self, flag: Option<usize>) -> usize {
        flag.or(self.word_budget).unwrap_or(DEFAULT_WORD_BUDGET)
    }

    pub(crate) fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(DEFAULT_SEED)
    }

    pub(crate) fn redaction(
        &self,
        tau_black: Option<f32>,
        tau_avg: Option<f32>,
        box_radius: Option<usize>,
    ) -> Result<RedactionParams, Failure> {
        let d = RedactionParams::default();
        let p = RedactionParams {
            tau_black: tau_black.or(self.tau_black).unwrap_or(d.tau_black),
            tau_avg: tau_avg.or(self.tau_avg).unwrap_or(d.tau_avg),
            box_radius: box_radius.or(self.box_radius).unwrap_or(d.box_radius),
        };
        p.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(p)
    }

    pub(crate) fn masker(&self, shape: &MaskerShape, seed: Option<u64>) -> Result<MaskerConfig, Failure> {
        let d = MaskerConfig::default();
        let blocks = shape.blocks.or(self.blocks).unwrap_or(d.encoder_blocks);
        let c = MaskerConfig {
            image_size: shape.image_size.or(self.image_size).unwrap_or(d.image_size),
            patch_size: shape.patch_size.or(self.patch_size).unwrap_or(d.patch_size),
            embed_dim: shape.embed_dim.or(self.embed_dim).unwrap_or(d.embed_dim),
            encoder_blocks: blocks,
            decoder_blocks: blocks,
            span_embed_dim: shape
                .span_embed_dim
                .or(self.span_embed_dim)
                .unwrap_or(d.span_embed_dim),
            seed: self.seed(seed),
        };
        c.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(c)
    }
}
