//! Deterministic desk-scale corpus: procedural "real" textures with genuine
//! fine-grain detail, and "fake" counterparts run through a
//! downsample/zero-insertion/smoothing chain that suppresses natural high
//! frequencies and stamps in periodic upsampling artifacts.

use std::path::Path;

use rand::Rng;

use crate::corpus::RgbImage;
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub side: u32,
    pub seed: u64,
    pub upsample_factor: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_per_class: 200,
            side: 256,
            seed: 7,
            upsample_factor: 4,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.side % 16 != 0 {
            return Err(Error::InvalidConfig(format!(
                "side {} must be a multiple of 16",
                self.side
            )));
        }
        if self.upsample_factor == 0 || self.side % self.upsample_factor != 0 {
            return Err(Error::InvalidConfig(format!(
                "side {} must be divisible by upsample_factor {}",
                self.side, self.upsample_factor
            )));
        }
        if self.n_per_class == 0 {
            return Err(Error::InvalidConfig("n_per_class must be >= 1".into()));
        }
        Ok(())
    }
}

/// Amplitude of the per-pixel fine-grain noise. Large enough that authentic
/// textures carry fine detail the degradation chain cannot reproduce, small
/// enough that block-variance distributions of the two classes overlap.
const FINE_NOISE_AMP: f32 = 0.05;
const VALUE_NOISE_AMP: f32 = 0.08;
// Not a divisor of the upsampling factors in use, so the midscale lattice
// never sits on the artifact bins the fakes are supposed to own.
const VALUE_NOISE_CELL: u32 = 20;

/// Procedural "real" texture: 3-6 low-frequency cosine gradients per channel,
/// midscale value noise, and per-pixel fine-grain noise, clamped to [0,1].
pub fn gen_real(config: &SynthConfig, index: usize) -> RgbImage {
    render(config, index, seeds::TAG_SYNTH_REAL)
}

/// "Fake" counterpart: a fresh texture from an independent stream, box
/// downsampled by `upsample_factor`, upsampled back by zero insertion plus a
/// fixed small smoothing kernel. `upsample_factor == 1` is a pass-through.
pub fn gen_fake(config: &SynthConfig, index: usize) -> RgbImage {
    let source = render(config, index, seeds::TAG_SYNTH_FAKE_SRC);
    degrade(&source, config.upsample_factor)
}

fn render(config: &SynthConfig, index: usize, tag: u64) -> RgbImage {
    let n = config.side;
    let mut rng = seeds::rng_for(config.seed, tag, index as u64);
    let mut data = vec![0.5f32; (n * n * 3) as usize];

    for c in 0..3 {
        let n_waves: usize = rng.random_range(3..=6);
        // Total wave swing stays within ~[-0.5, 0.5] around the 0.5 base, so
        // the clamp below almost never bites; hard clipping would spray
        // harmonics across the spectrum and muddy the class contrast.
        let max_amp = 0.5f32 / n_waves as f32;
        let waves: Vec<(f32, f32, f32, f32)> = (0..n_waves)
            .map(|_| {
                let amp = rng.random_range(0.05f32..max_amp);
                let freq = rng.random_range(0.4f32..2.5);
                let theta = rng.random_range(0.0f32..std::f32::consts::PI);
                let phase = rng.random_range(0.0f32..std::f32::consts::TAU);
                (amp, freq, theta, phase)
            })
            .collect();

        // Midscale value noise: random grid nodes blended with a quintic
        // fade. The smooth kernel keeps the node lattice out of the high
        // bins, which belong to the fakes' upsampling artifacts alone.
        let nodes_per_row = n.div_ceil(VALUE_NOISE_CELL) + 1;
        let nodes: Vec<f32> = (0..nodes_per_row * nodes_per_row)
            .map(|_| rng.random_range(-VALUE_NOISE_AMP..VALUE_NOISE_AMP))
            .collect();
        let fade = |t: f32| t * t * t * (t * (t * 6.0 - 15.0) + 10.0);

        for y in 0..n {
            for x in 0..n {
                let mut v = 0.0f32;
                for &(amp, freq, theta, phase) in &waves {
                    let proj = (x as f32) * theta.cos() + (y as f32) * theta.sin();
                    v += amp * (std::f32::consts::TAU * freq * proj / n as f32 + phase).cos();
                }
                let gx = x as f32 / VALUE_NOISE_CELL as f32;
                let gy = y as f32 / VALUE_NOISE_CELL as f32;
                let (ix, iy) = (gx.floor() as u32, gy.floor() as u32);
                let (fx, fy) = (fade(gx - ix as f32), fade(gy - iy as f32));
                let node = |xx: u32, yy: u32| nodes[(yy * nodes_per_row + xx) as usize];
                let top = node(ix, iy) * (1.0 - fx) + node(ix + 1, iy) * fx;
                let bot = node(ix, iy + 1) * (1.0 - fx) + node(ix + 1, iy + 1) * fx;
                v += top * (1.0 - fy) + bot * fy;
                data[((y * n + x) * 3) as usize + c] += v;
            }
        }

        // Fine grain, one draw per pixel; kept after the smooth fields so the
        // stream layout stays stable if field parameters change.
        for y in 0..n {
            for x in 0..n {
                let noise = rng.random_range(-FINE_NOISE_AMP..FINE_NOISE_AMP);
                let px = &mut data[((y * n + x) * 3) as usize + c];
                *px = (*px + noise).clamp(0.0, 1.0);
            }
        }
    }

    RgbImage::new(n, n, data)
}

/// Box-downsample by `factor`, zero-insert, then smooth with the fixed
/// length-`factor` box kernel. The chain is exact zero-order reconstruction:
/// every `factor x factor` cell collapses to its mean, which erases in-cell
/// fine grain and stamps a periodic cell lattice into the spectrum.
/// `factor == 1` is the identity.
pub fn degrade(image: &RgbImage, factor: u32) -> RgbImage {
    if factor <= 1 {
        return image.clone();
    }
    let n = image.width;
    debug_assert_eq!(image.height, n);
    debug_assert_eq!(n % factor, 0);
    let coarse_n = n / factor;

    let mut up = vec![0.0f32; image.data.len()];
    for c in 0..3 {
        for cy in 0..coarse_n {
            for cx in 0..coarse_n {
                let mut sum = 0.0f32;
                for dy in 0..factor {
                    for dx in 0..factor {
                        sum += image.get(cx * factor + dx, cy * factor + dy, c);
                    }
                }
                let mean = sum / (factor * factor) as f32;
                for dy in 0..factor {
                    for dx in 0..factor {
                        let (x, y) = (cx * factor + dx, cy * factor + dy);
                        up[((y * n + x) * 3) as usize + c] = mean;
                    }
                }
            }
        }
    }
    RgbImage::new(n, n, up)
}

fn to_rgb8(image: &RgbImage) -> image::RgbImage {
    image::RgbImage::from_fn(image.width, image.height, |x, y| {
        image::Rgb([
            (image.get(x, y, 0).clamp(0.0, 1.0) * 255.0).round() as u8,
            (image.get(x, y, 1).clamp(0.0, 1.0) * 255.0).round() as u8,
            (image.get(x, y, 2).clamp(0.0, 1.0) * 255.0).round() as u8,
        ])
    })
}

/// Write `real/` and `fake/` PNG trees under `out_dir` with zero-padded
/// numeric names. Returns the two class directories.
pub fn write_corpus(config: &SynthConfig, out_dir: &Path) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    config.validate()?;
    let real_dir = out_dir.join("real");
    let fake_dir = out_dir.join("fake");
    for dir in [&real_dir, &fake_dir] {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    use rayon::prelude::*;
    (0..config.n_per_class)
        .into_par_iter()
        .try_for_each(|i| -> Result<()> {
            let real = to_rgb8(&gen_real(config, i));
            let real_path = real_dir.join(format!("{i:04}.png"));
            real.save(&real_path).map_err(|e| {
                Error::io(
                    format!("writing {}", real_path.display()),
                    std::io::Error::other(e),
                )
            })?;
            let fake = to_rgb8(&gen_fake(config, i));
            let fake_path = fake_dir.join(format!("{i:04}.png"));
            fake.save(&fake_path).map_err(|e| {
                Error::io(
                    format!("writing {}", fake_path.display()),
                    std::io::Error::other(e),
                )
            })?;
            Ok(())
        })?;
    Ok((real_dir, fake_dir))
}
