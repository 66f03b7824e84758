//! Detector model: the serializable artifact bundling configs, filter
//! banks, the channel bank, and the image-level ensemble, with integrity
//! checking and parameter accounting.
//!
//! The on-disk form is a single JSON document:
//! `{"magic":"A-PIXELHOP","version":1,"digest":...,"config":...,"units":...,
//! "bank":...,"meta":...,"provenance":...}`. The digest is the SHA-256 of
//! the document serialized with an empty digest field, so any edit to the
//! body is detected on load.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blocks::AttentionConfig;
use crate::channelsel::{ChannelBank, ChannelKey};
use crate::ensemble::EnsembleConfig;
use crate::error::{Error, Result};
use crate::gbdt::{BoostConfig, GbdtModel};
use crate::saab::{FilterShape, SaabUnit};

pub const MAGIC: &str = "A-PIXELHOP";
pub const VERSION: u32 = 1;

/// Whether the model file keeps every kernel of each unit or only the
/// kernels of the selected channels. Inference needs only the selected ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelStorage {
    Selected,
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub seed: u64,
    pub val_fraction: f64,
    pub target_side: Option<u32>,
    pub n_sel_per_unit: usize,
    pub kernel_storage: KernelStorage,
    pub attention: AttentionConfig,
    pub boost: BoostConfig,
    pub ensemble: EnsembleConfig,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            seed: 7,
            val_fraction: 0.2,
            target_side: None,
            n_sel_per_unit: 2,
            kernel_storage: KernelStorage::Selected,
            attention: AttentionConfig::default(),
            boost: BoostConfig::default(),
            ensemble: EnsembleConfig::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "val_fraction {} must be in (0,1)",
                self.val_fraction
            )));
        }
        if !(1..=4).contains(&self.n_sel_per_unit) {
            return Err(Error::InvalidConfig(format!(
                "n_sel_per_unit {} not in 1..=4",
                self.n_sel_per_unit
            )));
        }
        self.attention.validate()?;
        self.boost.validate()?;
        self.ensemble.validate()?;
        Ok(())
    }
}

/// One stored kernel row; `eigenvalue` is absent for the DC kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredKernel {
    pub k: usize,
    pub eigenvalue: Option<f64>,
    pub weights: Vec<f64>,
}

/// The stored kernels of one unit, sorted by channel index. May hold all
/// `s*s*3` rows (full storage) or only the selected channels' rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitParams {
    pub s: usize,
    pub kernels: Vec<StoredKernel>,
}

impl UnitParams {
    pub fn full(unit: &SaabUnit) -> Self {
        let kernels = unit
            .kernels
            .iter()
            .enumerate()
            .map(|(k, w)| StoredKernel {
                k,
                eigenvalue: if k == 0 {
                    None
                } else {
                    Some(unit.eigenvalues[k - 1])
                },
                weights: w.clone(),
            })
            .collect();
        UnitParams {
            s: unit.shape.s,
            kernels,
        }
    }

    pub fn selected(unit: &SaabUnit, keep: &BTreeSet<usize>) -> Self {
        let mut pruned = Self::full(unit);
        pruned.kernels.retain(|sk| keep.contains(&sk.k));
        pruned
    }

    pub fn shape(&self) -> Result<FilterShape> {
        FilterShape::new(self.s)
            .map_err(|_| Error::Format(format!("unit references invalid filter side s={}", self.s)))
    }

    pub fn kernel(&self, k: usize) -> Option<&[f64]> {
        self.kernels
            .iter()
            .find(|sk| sk.k == k)
            .map(|sk| sk.weights.as_slice())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    /// Populated from `SOURCE_DATE_EPOCH` when set; otherwise absent so that
    /// identical runs produce byte-identical files.
    pub created: Option<String>,
    /// SHA-256 over the sorted training+validation manifest.
    pub corpus_digest: String,
    pub n_train: usize,
    pub n_val: usize,
}

impl Provenance {
    pub fn new(corpus_digest: String, n_train: usize, n_val: usize) -> Self {
        Provenance {
            created: std::env::var("SOURCE_DATE_EPOCH").ok(),
            corpus_digest,
            n_train,
            n_val,
        }
    }
}

/// The full trained detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorModel {
    pub config: DetectorConfig,
    pub units: Vec<UnitParams>,
    pub bank: ChannelBank,
    pub meta: GbdtModel,
    pub provenance: Provenance,
}

impl DetectorModel {
    /// Kernel and shape for a bank entry's channel.
    pub fn kernel_for(&self, key: ChannelKey) -> Result<(&[f64], FilterShape)> {
        let unit = self
            .units
            .iter()
            .find(|u| u.s == key.s)
            .ok_or_else(|| Error::Format(format!("bank references missing unit s={}", key.s)))?;
        let shape = unit.shape()?;
        let kernel = unit.kernel(key.k).ok_or_else(|| {
            Error::Format(format!(
                "bank references unstored kernel s={} k={}",
                key.s, key.k
            ))
        })?;
        Ok((kernel, shape))
    }

    /// Structural and numeric invariants; structural breakage is a format
    /// error, numeric breakage an invariant violation.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;

        for unit in &self.units {
            let shape = unit.shape()?;
            let d = shape.dim();
            for sk in &unit.kernels {
                if sk.k >= d {
                    return Err(Error::Format(format!(
                        "unit s={} stores kernel index {} >= {d}",
                        unit.s, sk.k
                    )));
                }
                if sk.weights.len() != d {
                    return Err(Error::Format(format!(
                        "unit s={} kernel {} has {} weights, expected {d}",
                        unit.s,
                        sk.k,
                        sk.weights.len()
                    )));
                }
                if !sk.weights.iter().all(|w| w.is_finite()) {
                    return Err(Error::InvariantViolation(format!(
                        "unit s={} kernel {} has non-finite weights",
                        unit.s, sk.k
                    )));
                }
            }
            if unit
                .kernels
                .windows(2)
                .any(|w| w[0].k >= w[1].k)
            {
                return Err(Error::Format(format!(
                    "unit s={} kernels not sorted by channel index",
                    unit.s
                )));
            }
            // Stored rows of an orthonormal basis must stay orthonormal.
            for (a, ska) in unit.kernels.iter().enumerate() {
                for skb in &unit.kernels[a..] {
                    let dot: f64 = ska
                        .weights
                        .iter()
                        .zip(&skb.weights)
                        .map(|(x, y)| x * y)
                        .sum();
                    let expect = if ska.k == skb.k { 1.0 } else { 0.0 };
                    if (dot - expect).abs() > 1e-6 {
                        return Err(Error::InvariantViolation(format!(
                            "unit s={} kernels {} and {} have gram {dot}, expected {expect}",
                            unit.s, ska.k, skb.k
                        )));
                    }
                }
            }
            let eigs: Vec<f64> = unit.kernels.iter().filter_map(|sk| sk.eigenvalue).collect();
            if eigs.windows(2).any(|w| w[0] < w[1]) {
                return Err(Error::InvariantViolation(format!(
                    "unit s={} eigenvalues not descending",
                    unit.s
                )));
            }
            if eigs.iter().any(|&l| l < 0.0) {
                return Err(Error::InvariantViolation(format!(
                    "unit s={} has a negative eigenvalue",
                    unit.s
                )));
            }
        }

        for record in &self.bank.selected {
            let (_, shape) = self.kernel_for(record.key)?;
            if record.model.n_features != shape.responses() {
                return Err(Error::InvariantViolation(format!(
                    "channel s={} k={} classifier expects {} features, channel has {}",
                    record.key.s,
                    record.key.k,
                    record.model.n_features,
                    shape.responses()
                )));
            }
            for (name, v) in [("train", record.train_auc), ("val", record.val_auc)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvariantViolation(format!(
                        "channel s={} k={} {name}_auc {v} outside [0,1]",
                        record.key.s, record.key.k
                    )));
                }
            }
        }

        let expected_meta = self.bank.selected.len() * 2 * self.config.ensemble.tail_count;
        if self.meta.n_features != expected_meta {
            return Err(Error::InvariantViolation(format!(
                "meta classifier expects {} features, bank implies {expected_meta}",
                self.meta.n_features
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    magic: String,
    version: u32,
    digest: String,
    config: DetectorConfig,
    units: Vec<UnitParams>,
    bank: ChannelBank,
    meta: GbdtModel,
    provenance: Provenance,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn canonical_digest(doc: &mut ModelFile) -> Result<String> {
    let saved = std::mem::take(&mut doc.digest);
    let body = serde_json::to_string(doc)
        .map_err(|e| Error::Format(format!("serialization failed: {e}")))?;
    doc.digest = saved;
    Ok(sha256_hex(body.as_bytes()))
}

/// Serialize the model to `path`, pruning kernels per
/// `config.kernel_storage`.
pub fn save(model: &DetectorModel, path: &Path) -> Result<()> {
    let units = match model.config.kernel_storage {
        KernelStorage::Full => model.units.clone(),
        KernelStorage::Selected => {
            let mut pruned = Vec::with_capacity(model.units.len());
            for unit in &model.units {
                let keep: BTreeSet<usize> = model
                    .bank
                    .selected
                    .iter()
                    .filter(|r| r.key.s == unit.s)
                    .map(|r| r.key.k)
                    .collect();
                let mut p = unit.clone();
                p.kernels.retain(|sk| keep.contains(&sk.k));
                pruned.push(p);
            }
            pruned
        }
    };

    let mut doc = ModelFile {
        magic: MAGIC.to_string(),
        version: VERSION,
        digest: String::new(),
        config: model.config.clone(),
        units,
        bank: model.bank.clone(),
        meta: model.meta.clone(),
        provenance: model.provenance.clone(),
    };
    doc.digest = canonical_digest(&mut doc)?;
    let body = serde_json::to_string(&doc)
        .map_err(|e| Error::Format(format!("serialization failed: {e}")))?;
    std::fs::write(path, body).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Parse, integrity-check and validate a model file.
pub fn load(path: &Path) -> Result<DetectorModel> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut doc: ModelFile =
        serde_json::from_str(&body).map_err(|e| Error::Format(format!("malformed model: {e}")))?;
    if doc.magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {MAGIC:?}",
            doc.magic
        )));
    }
    if doc.version != VERSION {
        return Err(Error::UnsupportedVersion(doc.version));
    }
    let recorded = doc.digest.clone();
    let computed = canonical_digest(&mut doc)?;
    if recorded != computed {
        return Err(Error::Format(
            "integrity digest mismatch; the file was modified or truncated".into(),
        ));
    }

    let model = DetectorModel {
        config: doc.config,
        units: doc.units,
        bank: doc.bank,
        meta: doc.meta,
        provenance: doc.provenance,
    };
    model.validate()?;
    Ok(model)
}

/// Parameter accounting for one unit under the selected-kernel convention:
/// each selected channel contributes its `s*s*3` kernel weights.
#[derive(Debug, Clone)]
pub struct UnitKernelCount {
    pub s: usize,
    pub selected_channels: usize,
    pub params: usize,
}

#[derive(Debug, Clone)]
pub struct ParamReport {
    /// Selected-kernel weights per unit (the headline accounting).
    pub kernels_selected: Vec<UnitKernelCount>,
    /// Weights actually stored in the model (full storage keeps every row).
    pub kernels_stored: usize,
    pub n_channels: usize,
    /// Complete-tree upper bound per channel classifier.
    pub channel_bound_each: usize,
    pub channel_actual_total: usize,
    pub meta_bound: usize,
    pub meta_actual: usize,
}

impl ParamReport {
    pub fn kernels_selected_total(&self) -> usize {
        self.kernels_selected.iter().map(|u| u.params).sum()
    }

    /// Complete-tree total: kernels + per-channel bounds + meta bound.
    pub fn total_bound(&self) -> usize {
        self.kernels_selected_total() + self.n_channels * self.channel_bound_each + self.meta_bound
    }

    /// Trained total: kernels + actual tree parameters.
    pub fn total_actual(&self) -> usize {
        self.kernels_selected_total() + self.channel_actual_total + self.meta_actual
    }
}

impl fmt::Display for ParamReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<24} {:>10} {:>10}", "component", "bound", "actual")?;
        for u in &self.kernels_selected {
            writeln!(
                f,
                "{:<24} {:>10} {:>10}",
                format!("{} ({}x{}x3)", u.selected_channels, u.s, u.s),
                u.params,
                u.params
            )?;
        }
        writeln!(
            f,
            "{:<24} {:>10} {:>10}",
            format!("{} classifiers", self.n_channels),
            self.n_channels * self.channel_bound_each,
            self.channel_actual_total
        )?;
        writeln!(
            f,
            "{:<24} {:>10} {:>10}",
            "1 ensemble", self.meta_bound, self.meta_actual
        )?;
        writeln!(
            f,
            "{:<24} {:>10} {:>10}",
            "total",
            self.total_bound(),
            self.total_actual()
        )?;
        write!(f, "stored kernel weights: {}", self.kernels_stored)
    }
}

pub fn param_report(model: &DetectorModel) -> ParamReport {
    let mut kernels_selected = Vec::new();
    for unit in &model.units {
        let n_sel = model
            .bank
            .selected
            .iter()
            .filter(|r| r.key.s == unit.s)
            .count();
        kernels_selected.push(UnitKernelCount {
            s: unit.s,
            selected_channels: n_sel,
            params: n_sel * unit.s * unit.s * 3,
        });
    }
    let kernels_stored = model
        .units
        .iter()
        .map(|u| u.kernels.iter().map(|sk| sk.weights.len()).sum::<usize>())
        .sum();

    ParamReport {
        kernels_selected,
        kernels_stored,
        n_channels: model.bank.selected.len(),
        channel_bound_each: model.config.boost.complete_params(),
        channel_actual_total: model
            .bank
            .selected
            .iter()
            .map(|r| r.model.count_params())
            .sum(),
        meta_bound: model.config.ensemble.meta.complete_params(),
        meta_actual: model.meta.count_params(),
    }
}
