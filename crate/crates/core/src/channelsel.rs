//! Per-channel classification and discriminant channel selection.
//!
//! Every (unit, channel) pair gets its own boosted-tree classifier trained on
//! block-level features; channels are ranked by validation AUC and the top
//! few per unit are kept.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{self, AttentionConfig, Block};
use crate::corpus::{self, Label, LabeledSet};
use crate::error::{Error, Result};
use crate::gbdt::{self, BoostConfig, FeatureMatrix, GbdtModel};
use crate::metrics;
use crate::saab::{self, SaabUnit};
use crate::seeds;

/// Identifies one channel: the unit's spatial side and the kernel index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelKey {
    pub s: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub key: ChannelKey,
    pub model: GbdtModel,
    pub train_auc: f64,
    pub val_auc: f64,
}

/// The selected discriminant channels, `n_sel_per_unit` per unit in unit
/// order (s = 2, 3, 4), each ordered by descending validation AUC.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelBank {
    pub selected: Vec<ChannelRecord>,
    pub n_sel_per_unit: usize,
}

/// The selected blocks of one labeled image.
#[derive(Debug, Clone)]
pub struct BlockSet {
    pub blocks: Vec<Block>,
    pub label: Label,
}

/// Load every image of the set and keep its attentive blocks. Decoding and
/// scoring run per image in parallel; output order follows the set.
pub fn build_blocksets(
    set: &LabeledSet,
    attention: &AttentionConfig,
    target_side: Option<u32>,
) -> Result<Vec<BlockSet>> {
    set.items
        .par_iter()
        .map(|(path, label)| {
            let image = corpus::load_image(path, target_side)?;
            Ok(BlockSet {
                blocks: blocks::select_blocks(&image, attention),
                label: *label,
            })
        })
        .collect()
}

/// Row indices keeping all of the minority class and a seeded downsample of
/// the majority class, in original row order. Identical labels and seed give
/// identical indices, so per-channel datasets stay row-aligned.
fn balanced_row_indices(labels: &[Label], seed: u64) -> Result<Vec<usize>> {
    let mut real: Vec<usize> = Vec::new();
    let mut fake: Vec<usize> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Label::Real => real.push(i),
            Label::Fake => fake.push(i),
        }
    }
    if real.is_empty() || fake.is_empty() {
        return Err(Error::SingleClass);
    }
    let n_keep = real.len().min(fake.len());
    let mut rng = seeds::rng_for(seed, seeds::TAG_CLASS_BALANCE, 0);
    let (majority, minority) = if real.len() > fake.len() {
        (&mut real, &fake)
    } else {
        (&mut fake, &real)
    };
    majority.shuffle(&mut rng);
    majority.truncate(n_keep);
    let mut kept: Vec<usize> = majority.iter().chain(minority.iter()).copied().collect();
    kept.sort_unstable();
    Ok(kept)
}

/// Class-balanced block-level dataset for one channel: one row per kept
/// block, features the channel's response plane, label inherited from the
/// source image.
pub fn channel_dataset(
    blocksets: &[BlockSet],
    unit: &SaabUnit,
    k: usize,
    seed: u64,
) -> Result<(FeatureMatrix, Vec<u8>)> {
    let kernel = unit.kernel(k)?;
    let shape = unit.shape;

    let labels: Vec<Label> = blocksets
        .iter()
        .flat_map(|bs| bs.blocks.iter().map(|_| bs.label))
        .collect();
    let kept = balanced_row_indices(&labels, seed)?;

    let all_blocks: Vec<&Block> = blocksets.iter().flat_map(|bs| bs.blocks.iter()).collect();
    let n_features = shape.responses();
    let mut data = Vec::with_capacity(kept.len() * n_features);
    let mut y = Vec::with_capacity(kept.len());
    for &row in &kept {
        data.extend(saab::channel_plane(all_blocks[row], kernel, shape));
        y.push(labels[row].as_u8());
    }
    Ok((FeatureMatrix::new(kept.len(), n_features, data), y))
}

/// Spec-level convenience: load the set, select blocks, and build the keyed
/// channel's dataset in one call.
pub fn build_block_dataset(
    images: &LabeledSet,
    units: &[SaabUnit],
    key: ChannelKey,
    attention: &AttentionConfig,
    seed: u64,
    target_side: Option<u32>,
) -> Result<(FeatureMatrix, Vec<u8>)> {
    let unit = units
        .iter()
        .find(|u| u.shape.s == key.s)
        .ok_or(Error::InvalidConfig(format!("no unit with s={}", key.s)))?;
    let blocksets = build_blocksets(images, attention, target_side)?;
    channel_dataset(&blocksets, unit, key.k, seed)
}

/// One line of the channel report, covering every channel of every unit.
#[derive(Debug, Clone)]
pub struct ChannelReportRow {
    pub s: usize,
    pub k: usize,
    pub train_auc: f64,
    pub val_auc: f64,
    pub selected: bool,
}

/// Write the `unit,channel,train_auc,val_auc,selected` CSV.
pub fn write_channel_report(
    out: &mut dyn std::io::Write,
    rows: &[ChannelReportRow],
) -> std::io::Result<()> {
    writeln!(out, "unit,channel,train_auc,val_auc,selected")?;
    for r in rows {
        writeln!(
            out,
            "{}x{}x3,{},{:.6},{:.6},{}",
            r.s, r.s, r.k, r.train_auc, r.val_auc, r.selected as u8
        )?;
    }
    Ok(())
}

/// Train one classifier per channel of every unit, rank channels by
/// validation AUC, and keep the top `n_sel_per_unit` per unit (ties broken
/// toward the lower channel index).
pub fn rank_and_select(
    train: &[BlockSet],
    val: &[BlockSet],
    units: &[SaabUnit],
    cfg: &BoostConfig,
    n_sel_per_unit: usize,
    seed: u64,
) -> Result<(ChannelBank, Vec<ChannelReportRow>)> {
    if !(1..=4).contains(&n_sel_per_unit) {
        return Err(Error::InvalidConfig(format!(
            "n_sel_per_unit {n_sel_per_unit} not in 1..=4"
        )));
    }

    let jobs: Vec<(usize, usize)> = units
        .iter()
        .enumerate()
        .flat_map(|(u, unit)| (0..unit.shape.dim()).map(move |k| (u, k)))
        .collect();

    let trained: Vec<Result<ChannelRecord>> = jobs
        .par_iter()
        .map(|&(u, k)| {
            let unit = &units[u];
            let (x_train, y_train) = channel_dataset(train, unit, k, seed)?;
            let model = gbdt::fit(&x_train, &y_train, cfg)?;

            let train_scored: Vec<(f64, u8)> = (0..x_train.rows())
                .map(|i| Ok((model.predict_proba(x_train.row(i))?, y_train[i])))
                .collect::<Result<_>>()?;
            let train_auc = metrics::auc(&train_scored)?;

            let (x_val, y_val) = channel_dataset(val, unit, k, seed)?;
            let val_scored: Vec<(f64, u8)> = (0..x_val.rows())
                .map(|i| Ok((model.predict_proba(x_val.row(i))?, y_val[i])))
                .collect::<Result<_>>()?;
            let val_auc = metrics::auc(&val_scored)?;

            Ok(ChannelRecord {
                key: ChannelKey {
                    s: unit.shape.s,
                    k,
                },
                model,
                train_auc,
                val_auc,
            })
        })
        .collect();

    let mut per_unit: Vec<Vec<ChannelRecord>> = vec![Vec::new(); units.len()];
    for ((u, _), record) in jobs.iter().zip(trained) {
        per_unit[*u].push(record?);
    }

    let mut selected = Vec::with_capacity(units.len() * n_sel_per_unit);
    let mut report = Vec::new();
    for records in per_unit.iter_mut() {
        records.sort_by(|a, b| {
            b.val_auc
                .partial_cmp(&a.val_auc)
                .unwrap()
                .then(a.key.k.cmp(&b.key.k))
        });
        let chosen: Vec<usize> = records.iter().take(n_sel_per_unit).map(|r| r.key.k).collect();
        selected.extend(records.iter().take(n_sel_per_unit).cloned());

        let mut unit_report: Vec<ChannelReportRow> = records
            .iter()
            .map(|r| ChannelReportRow {
                s: r.key.s,
                k: r.key.k,
                train_auc: r.train_auc,
                val_auc: r.val_auc,
                selected: chosen.contains(&r.key.k),
            })
            .collect();
        unit_report.sort_by_key(|r| r.k);
        report.extend(unit_report);
    }

    Ok((
        ChannelBank {
            selected,
            n_sel_per_unit,
        },
        report,
    ))
}
