//! 16x16 block partition and attentive block selection.
//!
//! A block's attention score is the partial sum of its DC-removed residual
//! variances: remove each channel's block mean, tile the residual into small
//! sub-blocks, take each sub-block's mean squared residual summed over
//! channels, and sum the largest fraction of them. Edge/texture blocks score
//! high; flat and smoothly-shaded blocks score low.

use crate::corpus::RgbImage;

pub const BLOCK_SIDE: usize = 16;
const BLOCK_PIXELS: usize = BLOCK_SIDE * BLOCK_SIDE;

/// One 16x16x3 block cut from an image; `x0`/`y0` are the top-left pixel in
/// the source image. Data is row-major with the channel index fastest.
#[derive(Debug, Clone)]
pub struct Block {
    pub x0: u32,
    pub y0: u32,
    pub data: Vec<f64>,
}

impl Block {
    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * BLOCK_SIDE + x) * 3 + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttentionConfig {
    /// Blocks kept per image (K). Clamped to the available block count.
    pub blocks_per_image: usize,
    /// Side of the scoring sub-blocks; must divide 16.
    pub subblock_side: usize,
    /// Fraction of sub-block variances entering the partial sum, in (0,1].
    pub partial_fraction: f64,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig {
            blocks_per_image: 64,
            subblock_side: 4,
            partial_fraction: 0.5,
        }
    }
}

impl AttentionConfig {
    pub fn validate(&self) -> crate::error::Result<()> {
        if self.blocks_per_image == 0 {
            return Err(crate::error::Error::InvalidConfig(
                "blocks_per_image must be >= 1".into(),
            ));
        }
        if self.subblock_side == 0 || BLOCK_SIDE % self.subblock_side != 0 {
            return Err(crate::error::Error::InvalidConfig(format!(
                "subblock_side {} must divide 16",
                self.subblock_side
            )));
        }
        if !(self.partial_fraction > 0.0 && self.partial_fraction <= 1.0) {
            return Err(crate::error::Error::InvalidConfig(format!(
                "partial_fraction {} must be in (0,1]",
                self.partial_fraction
            )));
        }
        Ok(())
    }
}

/// Cut the image into non-overlapping 16x16 blocks tiling the largest
/// centered sub-image whose sides are multiples of 16. Blocks come out in
/// raster order.
pub fn partition(image: &RgbImage) -> Vec<Block> {
    let nbx = (image.width as usize) / BLOCK_SIDE;
    let nby = (image.height as usize) / BLOCK_SIDE;
    let off_x = ((image.width as usize) - nbx * BLOCK_SIDE) / 2;
    let off_y = ((image.height as usize) - nby * BLOCK_SIDE) / 2;

    let mut blocks = Vec::with_capacity(nbx * nby);
    for by in 0..nby {
        for bx in 0..nbx {
            let x0 = off_x + bx * BLOCK_SIDE;
            let y0 = off_y + by * BLOCK_SIDE;
            let mut data = Vec::with_capacity(BLOCK_PIXELS * 3);
            for y in 0..BLOCK_SIDE {
                for x in 0..BLOCK_SIDE {
                    for c in 0..3 {
                        data.push(image.get((x0 + x) as u32, (y0 + y) as u32, c) as f64);
                    }
                }
            }
            blocks.push(Block {
                x0: x0 as u32,
                y0: y0 as u32,
                data,
            });
        }
    }
    blocks
}

/// Attention score: partial sum of the largest sub-block residual variances.
///
/// The residual is taken against the block's per-channel mean only, so a
/// block scores zero iff it is constant per channel, and adding a constant
/// per channel never changes the score.
pub fn score_block(block: &Block, cfg: &AttentionConfig) -> f64 {
    let mut means = [0.0f64; 3];
    for p in 0..BLOCK_PIXELS {
        for (c, mean) in means.iter_mut().enumerate() {
            *mean += block.data[p * 3 + c];
        }
    }
    for mean in means.iter_mut() {
        *mean /= BLOCK_PIXELS as f64;
    }

    let sub = cfg.subblock_side;
    let per_side = BLOCK_SIDE / sub;
    let sub_pixels = (sub * sub) as f64;
    let mut variances = Vec::with_capacity(per_side * per_side);
    for sy in 0..per_side {
        for sx in 0..per_side {
            let mut sq = 0.0f64;
            for y in 0..sub {
                for x in 0..sub {
                    for (c, mean) in means.iter().enumerate() {
                        let r = block.get(sx * sub + x, sy * sub + y, c) - mean;
                        sq += r * r;
                    }
                }
            }
            variances.push(sq / sub_pixels);
        }
    }

    variances.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let keep = ((cfg.partial_fraction * variances.len() as f64).ceil() as usize)
        .clamp(1, variances.len());
    variances[..keep].iter().sum()
}

/// Blocks with their scores, ordered by descending score; ties broken by
/// raster order (smaller y0, then x0).
pub fn score_and_rank(image: &RgbImage, cfg: &AttentionConfig) -> Vec<(Block, f64)> {
    let mut scored: Vec<(Block, f64)> = partition(image)
        .into_iter()
        .map(|b| {
            let s = score_block(&b, cfg);
            (b, s)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then(a.0.y0.cmp(&b.0.y0))
            .then(a.0.x0.cmp(&b.0.x0))
    });
    scored
}

/// The `min(K, total)` highest-scoring blocks, by descending score.
pub fn select_blocks(image: &RgbImage, cfg: &AttentionConfig) -> Vec<Block> {
    let mut scored = score_and_rank(image, cfg);
    scored.truncate(cfg.blocks_per_image);
    scored.into_iter().map(|(b, _)| b).collect()
}

/// Grayscale mask of the selected blocks (255 = selected), image-sized.
pub fn attention_mask(image: &RgbImage, cfg: &AttentionConfig) -> image::GrayImage {
    let selected = select_blocks(image, cfg);
    let mut mask = image::GrayImage::new(image.width, image.height);
    for block in &selected {
        for y in 0..BLOCK_SIDE as u32 {
            for x in 0..BLOCK_SIDE as u32 {
                mask.put_pixel(block.x0 + x, block.y0 + y, image::Luma([255u8]));
            }
        }
    }
    mask
}
