//! Image-level ensemble: collect per-channel block soft decisions, sample
//! the two ends of each channel's score distribution, and feed the sampled
//! features to a stump ensemble for the final verdict.
//!
//! Soft decisions near one half carry little information; the most confident
//! decisions live at the two ends of the sorted distribution. Per channel we
//! take the bottom and top `0.5 p %` of block scores, reading `tail_count`
//! values at evenly spaced ranks from each tail so the feature width stays
//! fixed regardless of image resolution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{self, Block};
use crate::channelsel::BlockSet;
use crate::corpus::{Label, RgbImage};
use crate::error::{Error, Result};
use crate::gbdt::{self, BoostConfig, FeatureMatrix, GbdtModel};
use crate::model::DetectorModel;
use crate::saab;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Total percentage of soft decisions represented by the two tails.
    pub p_percent: f64,
    /// Features read from each tail.
    pub tail_count: usize,
    /// The stump-ensemble configuration for the image-level classifier.
    pub meta: BoostConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            p_percent: 20.0,
            tail_count: 13,
            meta: BoostConfig::meta_default(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_percent > 0.0 && self.p_percent < 100.0) {
            return Err(Error::InvalidConfig(format!(
                "p_percent {} must be in (0,100)",
                self.p_percent
            )));
        }
        if self.tail_count == 0 {
            return Err(Error::InvalidConfig("tail_count must be >= 1".into()));
        }
        self.meta.validate()
    }
}

/// Per-channel block probabilities for one image, in bank order. All
/// vectors share the same length: the image's selected block count.
#[derive(Debug, Clone)]
pub struct SoftDecisionSet {
    pub per_channel: Vec<Vec<f64>>,
}

/// Soft decisions for pre-selected blocks under every bank channel.
pub fn soft_decisions_for_blocks(
    blocks: &[Block],
    model: &DetectorModel,
) -> Result<SoftDecisionSet> {
    let mut per_channel = Vec::with_capacity(model.bank.selected.len());
    for record in &model.bank.selected {
        let (kernel, shape) = model.kernel_for(record.key)?;
        let mut scores = Vec::with_capacity(blocks.len());
        for block in blocks {
            let features = saab::channel_plane(block, kernel, shape);
            scores.push(record.model.predict_proba(&features)?);
        }
        per_channel.push(scores);
    }
    Ok(SoftDecisionSet { per_channel })
}

/// Select the image's attentive blocks and score them under every bank
/// channel.
pub fn collect_soft_decisions(
    image: &RgbImage,
    model: &DetectorModel,
) -> Result<SoftDecisionSet> {
    let selected = blocks::select_blocks(image, &model.config.attention);
    soft_decisions_for_blocks(&selected, model)
}

/// Sample `tail_count` values from each end of the score distribution.
///
/// The tail width is `max(1, round(0.005 * p * B))` (half of p% per end,
/// round half up). Within each tail, values are read at evenly spaced ranks
/// `round(i * (N-1) / (T-1))`; a tail narrower than `tail_count` repeats its
/// boundary values. Output: bottom tail ascending, then top tail ascending.
pub fn tail_sample(scores: &[f64], p_percent: f64, tail_count: usize) -> Vec<f64> {
    assert!(!scores.is_empty(), "tail_sample needs at least one score");
    assert!(tail_count >= 1);
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let b = sorted.len();
    let n_tail = (0.005 * p_percent * b as f64).round() as usize;
    let n_tail = n_tail.clamp(1, b);

    let rank = |i: usize| -> usize {
        if tail_count == 1 {
            0
        } else {
            ((i as f64) * ((n_tail - 1) as f64) / ((tail_count - 1) as f64)).round() as usize
        }
    };
    let mut out = Vec::with_capacity(2 * tail_count);
    for i in 0..tail_count {
        out.push(sorted[rank(i)]);
    }
    let top_base = b - n_tail;
    for i in 0..tail_count {
        out.push(sorted[top_base + rank(i)]);
    }
    out
}

/// Concatenate the tail samples of every channel in bank order; the length
/// is `n_channels * 2 * tail_count` independent of image size.
pub fn image_feature(sd: &SoftDecisionSet, cfg: &EnsembleConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(sd.per_channel.len() * 2 * cfg.tail_count);
    for scores in &sd.per_channel {
        out.extend(tail_sample(scores, cfg.p_percent, cfg.tail_count));
    }
    out
}

/// Fit the image-level stump ensemble on the training images' features.
/// `model.meta` is ignored; everything else (units, bank, configs) must be
/// in place.
pub fn fit_meta(train: &[BlockSet], model: &DetectorModel) -> Result<GbdtModel> {
    let rows: Vec<Vec<f64>> = train
        .par_iter()
        .map(|bs| {
            let sd = soft_decisions_for_blocks(&bs.blocks, model)?;
            Ok(image_feature(&sd, &model.config.ensemble))
        })
        .collect::<Result<_>>()?;
    let y: Vec<u8> = train.iter().map(|bs| bs.label.as_u8()).collect();
    gbdt::fit(&FeatureMatrix::from_rows(&rows), &y, &model.config.ensemble.meta)
}

/// Score one image: the meta probability of its two-end feature vector.
/// The label is fake iff the score reaches `threshold`.
pub fn predict_image(
    image: &RgbImage,
    model: &DetectorModel,
    threshold: f64,
) -> Result<(f64, Label)> {
    let sd = collect_soft_decisions(image, model)?;
    let feature = image_feature(&sd, &model.config.ensemble);
    let score = model.meta.predict_proba(&feature)?;
    let label = if score >= threshold {
        Label::Fake
    } else {
        Label::Real
    };
    Ok((score, label))
}
