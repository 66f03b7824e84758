//! Dataset ingestion: image decoding, directory scanning, and deterministic
//! train/validation splits.
//!
//! The dataset contract is a directory per class: `real/` holds authentic
//! images, `fake/` holds generated ones, PNG or JPEG. Pixels are normalized
//! to `[0,1]` by `v / 255`.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use rand::seq::SliceRandom;
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::seeds;

/// Side of the square analysis blocks; images below this are rejected.
pub const MIN_SIDE: u32 = 16;

/// Decoded RGB raster, row-major `height x width x 3`, values in `[0,1]`.
#[derive(Debug, Clone)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), (width * height * 3) as usize);
        RgbImage {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: usize) -> f32 {
        self.data[((y * self.width + x) * 3) as usize + c]
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Real => 0,
            Label::Fake => 1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Real => write!(f, "real"),
            Label::Fake => write!(f, "fake"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitTag::Train => write!(f, "train"),
            SplitTag::Val => write!(f, "val"),
            SplitTag::Test => write!(f, "test"),
        }
    }
}

/// A list of labeled image paths belonging to one split.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub items: Vec<(PathBuf, Label)>,
    pub tag: SplitTag,
}

impl LabeledSet {
    pub fn count(&self, label: Label) -> usize {
        self.items.iter().filter(|(_, l)| *l == label).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SplitConfig {
    pub val_fraction: f64,
    pub seed: u64,
}

/// Decode a PNG or JPEG file into an [`RgbImage`].
///
/// Grayscale inputs are replicated to three channels and alpha is dropped.
/// When `target_side` is set and the smaller image side exceeds it, the image
/// is bilinearly downscaled so that the smaller side equals `target_side`
/// (aspect ratio preserved to rounding).
pub fn load_image(path: &Path, target_side: Option<u32>) -> Result<RgbImage> {
    let decoded = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut rgb = decoded.to_rgb8();

    if let Some(target) = target_side {
        let (w, h) = (rgb.width(), rgb.height());
        let min_side = w.min(h);
        if min_side > target && target > 0 {
            let (nw, nh) = scaled_dims(w, h, target);
            rgb = image::imageops::resize(&rgb, nw, nh, FilterType::Triangle);
        }
    }

    let (w, h) = (rgb.width(), rgb.height());
    if w < MIN_SIDE || h < MIN_SIDE {
        return Err(Error::TooSmall {
            path: path.to_path_buf(),
            width: w,
            height: h,
        });
    }

    let data = rgb.into_raw().iter().map(|&v| v as f32 / 255.0).collect();
    Ok(RgbImage::new(w, h, data))
}

/// Dimensions after scaling so the smaller side equals `target`.
pub fn scaled_dims(w: u32, h: u32, target: u32) -> (u32, u32) {
    if w <= h {
        let nh = ((h as f64) * (target as f64) / (w as f64)).round() as u32;
        (target, nh.max(1))
    } else {
        let nw = ((w as f64) * (target as f64) / (h as f64)).round() as u32;
        (nw.max(1), target)
    }
}

fn is_image_path(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("png") | Some("jpg") | Some("jpeg")
    )
}

/// All image files under `dir`, sorted by path for determinism.
pub fn list_images(dir: &Path) -> Vec<PathBuf> {
    let mut paths: Vec<PathBuf> = WalkDir::new(dir)
        .follow_links(true)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| is_image_path(p))
        .collect();
    paths.sort();
    paths
}

/// Scan the two class directories and produce deterministic train/val splits.
///
/// Per class, `round(val_fraction * n)` images go to validation; membership
/// is a pure function of (sorted paths, seed, val_fraction).
pub fn scan_corpus(
    real_dir: &Path,
    fake_dir: &Path,
    split: &SplitConfig,
) -> Result<(LabeledSet, LabeledSet)> {
    let mut train = Vec::new();
    let mut val = Vec::new();

    for (dir, label, tag) in [
        (real_dir, Label::Real, seeds::TAG_SPLIT_REAL),
        (fake_dir, Label::Fake, seeds::TAG_SPLIT_FAKE),
    ] {
        let paths = list_images(dir);
        if paths.is_empty() {
            return Err(Error::EmptyClass {
                dir: dir.to_path_buf(),
            });
        }
        let n_val = ((paths.len() as f64) * split.val_fraction).round() as usize;
        let n_val = n_val.min(paths.len());

        let mut order: Vec<usize> = (0..paths.len()).collect();
        let mut rng = seeds::rng_for(split.seed, tag, 0);
        order.shuffle(&mut rng);

        let mut val_mask = vec![false; paths.len()];
        for &i in order.iter().take(n_val) {
            val_mask[i] = true;
        }
        for (i, path) in paths.into_iter().enumerate() {
            if val_mask[i] {
                val.push((path, label));
            } else {
                train.push((path, label));
            }
        }
    }

    train.sort();
    val.sort();
    Ok((
        LabeledSet {
            items: train,
            tag: SplitTag::Train,
        },
        LabeledSet {
            items: val,
            tag: SplitTag::Val,
        },
    ))
}

/// Write the `path,label,split` manifest CSV for the given sets.
pub fn write_manifest(out: &mut dyn Write, sets: &[&LabeledSet]) -> std::io::Result<()> {
    writeln!(out, "path,label,split")?;
    for set in sets {
        for (path, label) in &set.items {
            writeln!(out, "{},{},{}", path.display(), label.as_u8(), set.tag)?;
        }
    }
    Ok(())
}

/// SHA-256 over the sorted `path,label` lines of the given sets; recorded in
/// model provenance so a model can be tied to the corpus it was trained on.
pub fn manifest_digest(sets: &[&LabeledSet]) -> String {
    use sha2::{Digest, Sha256};
    let mut lines: Vec<String> = sets
        .iter()
        .flat_map(|s| {
            s.items
                .iter()
                .map(|(p, l)| format!("{},{}", p.display(), l.as_u8()))
        })
        .collect();
    lines.sort();
    let mut hasher = Sha256::new();
    for line in lines {
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_png(path: &Path, w: u32, h: u32) {
        let img = image::RgbImage::from_fn(w, h, |x, y| {
            image::Rgb([(x % 256) as u8, (y % 256) as u8, ((x + y) % 256) as u8])
        });
        img.save(path).unwrap();
    }

    #[test]
    fn load_plain_png() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        write_png(&p, 256, 256);
        let img = load_image(&p, None).unwrap();
        assert_eq!((img.width, img.height), (256, 256));
        assert_eq!(img.data.len(), 196_608);
        assert!(img.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn load_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        write_png(&p, 64, 48);
        let a = load_image(&p, None).unwrap();
        let b = load_image(&p, None).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn downscale_preserves_aspect() {
        // 3000x4000 at target 512 -> 512x683 (round(4000*512/3000) = 683).
        assert_eq!(scaled_dims(3000, 4000, 512), (512, 683));
        assert_eq!(scaled_dims(4000, 3000, 512), (683, 512));
        // No upscaling: handled by caller (min side must exceed target).
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("big.png");
        write_png(&p, 300, 400);
        let img = load_image(&p, Some(100)).unwrap();
        assert_eq!((img.width, img.height), (100, 133));
        let small = load_image(&p, Some(512)).unwrap();
        assert_eq!((small.width, small.height), (300, 400));
    }

    #[test]
    fn too_small_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tiny.png");
        write_png(&p, 8, 8);
        match load_image(&p, None) {
            Err(Error::TooSmall { width: 8, .. }) => {}
            other => panic!("expected TooSmall, got {other:?}"),
        }
    }

    #[test]
    fn grayscale_replicated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gray.png");
        let img = image::GrayImage::from_fn(32, 32, |x, _| image::Luma([x as u8]));
        img.save(&p).unwrap();
        let loaded = load_image(&p, None).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                let r = loaded.get(x, y, 0);
                assert_eq!(r, loaded.get(x, y, 1));
                assert_eq!(r, loaded.get(x, y, 2));
            }
        }
    }

    fn corpus_dirs(n_real: usize, n_fake: usize) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("real")).unwrap();
        std::fs::create_dir(dir.path().join("fake")).unwrap();
        for i in 0..n_real {
            write_png(&dir.path().join(format!("real/{i:03}.png")), 32, 32);
        }
        for i in 0..n_fake {
            write_png(&dir.path().join(format!("fake/{i:03}.png")), 32, 32);
        }
        dir
    }

    #[test]
    fn split_counts_and_partition() {
        let dir = corpus_dirs(100, 100);
        let cfg = SplitConfig {
            val_fraction: 0.2,
            seed: 7,
        };
        let (train, val) = scan_corpus(&dir.path().join("real"), &dir.path().join("fake"), &cfg)
            .unwrap();
        assert_eq!(train.count(Label::Real), 80);
        assert_eq!(train.count(Label::Fake), 80);
        assert_eq!(val.count(Label::Real), 20);
        assert_eq!(val.count(Label::Fake), 20);

        let train_paths: std::collections::BTreeSet<_> =
            train.items.iter().map(|(p, _)| p.clone()).collect();
        let val_paths: std::collections::BTreeSet<_> =
            val.items.iter().map(|(p, _)| p.clone()).collect();
        assert!(train_paths.is_disjoint(&val_paths));
        assert_eq!(train_paths.len() + val_paths.len(), 200);
    }

    #[test]
    fn split_is_deterministic() {
        let dir = corpus_dirs(10, 10);
        let cfg = SplitConfig {
            val_fraction: 0.3,
            seed: 42,
        };
        let real = dir.path().join("real");
        let fake = dir.path().join("fake");
        let (t1, v1) = scan_corpus(&real, &fake, &cfg).unwrap();
        let (t2, v2) = scan_corpus(&real, &fake, &cfg).unwrap();
        assert_eq!(t1.items, t2.items);
        assert_eq!(v1.items, v2.items);

        let other = SplitConfig {
            val_fraction: 0.3,
            seed: 43,
        };
        let (t3, _) = scan_corpus(&real, &fake, &other).unwrap();
        assert_ne!(t1.items, t3.items);
    }

    #[test]
    fn empty_class_rejected() {
        let dir = corpus_dirs(3, 0);
        let cfg = SplitConfig {
            val_fraction: 0.2,
            seed: 1,
        };
        match scan_corpus(&dir.path().join("real"), &dir.path().join("fake"), &cfg) {
            Err(Error::EmptyClass { .. }) => {}
            other => panic!("expected EmptyClass, got {other:?}"),
        }
    }

    #[test]
    fn manifest_format() {
        let dir = corpus_dirs(2, 2);
        let cfg = SplitConfig {
            val_fraction: 0.5,
            seed: 3,
        };
        let (train, val) = scan_corpus(&dir.path().join("real"), &dir.path().join("fake"), &cfg)
            .unwrap();
        let mut buf = Vec::new();
        write_manifest(&mut buf, &[&train, &val]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("path,label,split"));
        assert_eq!(lines.count(), 4);
    }
}
