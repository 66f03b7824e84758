//! Single-stage Saab filter banks.
//!
//! A unit of spatial side `s` holds `d = s*s*3` orthonormal kernels: the
//! constant DC kernel plus `d-1` AC kernels, the principal directions of the
//! DC-removed patch residuals. Applied at stride 1 over a 16x16 block, each
//! kernel yields a `(17-s)^2` response plane (one channel).

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::blocks::{Block, BLOCK_SIDE};
use crate::error::{Error, Result};
use crate::seeds;

/// Cap on the number of patches accumulated into the covariance when
/// learning a unit; keeps filter learning cheap on large corpora.
pub const PATCH_SAMPLE_CAP: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterShape {
    /// Spatial side of the kernels; 2, 3 or 4.
    pub s: usize,
}

impl FilterShape {
    pub fn new(s: usize) -> Result<Self> {
        if !(2..=4).contains(&s) {
            return Err(Error::InvalidConfig(format!(
                "filter side {s} not in {{2,3,4}}"
            )));
        }
        Ok(FilterShape { s })
    }

    /// The three standard unit shapes: 2x2x3, 3x3x3, 4x4x3.
    pub fn standard() -> [FilterShape; 3] {
        [FilterShape { s: 2 }, FilterShape { s: 3 }, FilterShape { s: 4 }]
    }

    /// Flattened kernel dimension `s*s*3`, also the channel count.
    #[inline]
    pub fn dim(&self) -> usize {
        self.s * self.s * 3
    }

    /// Side of the stride-1 response grid over a 16x16 block.
    #[inline]
    pub fn grid_side(&self) -> usize {
        17 - self.s
    }

    /// Responses per channel: `(17-s)^2`.
    #[inline]
    pub fn responses(&self) -> usize {
        self.grid_side() * self.grid_side()
    }
}

/// A learned filter bank: kernel 0 is the DC kernel `(1/sqrt(d)) * 1`,
/// kernels `1..d` are AC kernels ordered by descending eigenvalue. Rows are
/// orthonormal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaabUnit {
    pub shape: FilterShape,
    /// `d` rows of length `d`.
    pub kernels: Vec<Vec<f64>>,
    /// `d-1` eigenvalues for the AC kernels, descending.
    pub eigenvalues: Vec<f64>,
    /// Set when the input had no residual energy and the AC kernels are an
    /// arbitrary (but deterministic) orthonormal completion.
    pub degenerate: bool,
}

impl SaabUnit {
    pub fn kernel(&self, k: usize) -> Result<&[f64]> {
        self.kernels
            .get(k)
            .map(|v| v.as_slice())
            .ok_or(Error::IndexOutOfRange {
                k,
                dim: self.shape.dim(),
            })
    }
}

/// Stride-1 responses of one block under one unit. Layout is position-major:
/// `grid[(i * side + j) * d + k]` is channel `k` at grid row `i`, column `j`.
#[derive(Debug, Clone)]
pub struct ResponseCube {
    pub shape: FilterShape,
    pub grid: Vec<f64>,
}

#[inline]
fn fill_patch(block: &Block, i: usize, j: usize, s: usize, out: &mut [f64]) {
    let mut idx = 0;
    for r in 0..s {
        let row = (i + r) * BLOCK_SIDE;
        for c in 0..s {
            let base = (row + j + c) * 3;
            out[idx] = block.data[base];
            out[idx + 1] = block.data[base + 1];
            out[idx + 2] = block.data[base + 2];
            idx += 3;
        }
    }
}

/// All `(17-s)^2` stride-1 patches of a block in raster order, each
/// flattened row-major with the channel index fastest. The flattening order
/// is part of the model contract.
pub fn extract_patches(block: &Block, shape: FilterShape) -> Vec<Vec<f64>> {
    let g = shape.grid_side();
    let d = shape.dim();
    let mut patches = Vec::with_capacity(g * g);
    for i in 0..g {
        for j in 0..g {
            let mut p = vec![0.0; d];
            fill_patch(block, i, j, shape.s, &mut p);
            patches.push(p);
        }
    }
    patches
}

/// Up to `cap` training patches drawn round-robin from the given blocks in a
/// seeded shuffled order: patch rank 0 of every block first, then rank 1, and
/// so on, so the sample spreads evenly across blocks.
pub fn sample_training_patches(
    blocks: &[&Block],
    shape: FilterShape,
    cap: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    let mut rng = seeds::rng_for(seed, seeds::TAG_PATCH_SAMPLE, shape.s as u64);
    order.shuffle(&mut rng);

    let g = shape.grid_side();
    let d = shape.dim();
    let per_block = shape.responses();
    let take = cap.min(blocks.len() * per_block);
    let mut out = Vec::with_capacity(take);
    'outer: for rank in 0..per_block {
        let (i, j) = (rank / g, rank % g);
        for &b in &order {
            if out.len() == take {
                break 'outer;
            }
            let mut p = vec![0.0; d];
            fill_patch(blocks[b], i, j, shape.s, &mut p);
            out.push(p);
        }
    }
    out
}

/// Learn a Saab unit from flattened patches.
///
/// The DC kernel is fixed; AC kernels are the eigenvectors of the second
/// moment of the DC-removed residuals, by descending eigenvalue, each sign
/// fixed so its largest-magnitude entry is positive.
pub fn learn_unit(patches: &[Vec<f64>], shape: FilterShape) -> Result<SaabUnit> {
    let d = shape.dim();
    let required = 10 * d;
    if patches.len() < required {
        return Err(Error::InsufficientPatches {
            required,
            got: patches.len(),
            dim: d,
        });
    }

    let dc = 1.0 / (d as f64).sqrt();
    let cov = residual_second_moment(patches, d, dc);
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();

    let mut kernels = Vec::with_capacity(d);
    kernels.push(vec![dc; d]);

    if trace < 1e-18 {
        // No residual energy: any orthonormal completion of the DC direction
        // works. Use the Householder reflector that maps e0 to the DC kernel.
        for col in householder_completion(d, dc) {
            kernels.push(col);
        }
        for kernel in kernels.iter_mut().skip(1) {
            fix_sign(kernel);
        }
        return Ok(SaabUnit {
            shape,
            kernels,
            eigenvalues: vec![0.0; d - 1],
            degenerate: true,
        });
    }

    let (eigvals, eigvecs) = jacobi_eigen_sym(cov, d);
    // Candidates in descending eigenvalue order, with the Householder
    // completion as a deterministic fallback pool for rank-deficient input
    // (the DC direction itself sits in the eigenbasis at eigenvalue ~0).
    let mut eigenvalues = Vec::with_capacity(d - 1);
    let mut candidates: Vec<(f64, Vec<f64>)> = eigvals
        .iter()
        .zip(eigvecs)
        .map(|(&l, v)| (l.max(0.0), v))
        .collect();
    candidates.extend(
        householder_completion(d, dc)
            .into_iter()
            .map(|v| (0.0, v)),
    );

    for (lambda, mut v) in candidates {
        if kernels.len() == d {
            break;
        }
        // Project out the DC direction and previously accepted kernels; this
        // is a no-op up to rounding for the well-separated case and guards
        // the orthonormal-basis invariant when the spectrum is degenerate.
        for accepted in &kernels {
            let dot: f64 = v.iter().zip(accepted).map(|(a, b)| a * b).sum();
            for (vi, ki) in v.iter_mut().zip(accepted) {
                *vi -= dot * ki;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        fix_sign(&mut v);
        kernels.push(v);
        eigenvalues.push(lambda);
    }
    debug_assert_eq!(kernels.len(), d);

    Ok(SaabUnit {
        shape,
        kernels,
        eigenvalues,
        degenerate: false,
    })
}

/// `(1/N) * sum r r^T` over DC-removed residuals, accumulated in fixed-size
/// chunks combined in order so the result is thread-count independent.
fn residual_second_moment(patches: &[Vec<f64>], d: usize, dc: f64) -> Vec<f64> {
    use rayon::prelude::*;
    const CHUNK: usize = 4096;

    let partials: Vec<Vec<f64>> = patches
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0f64; d * d];
            let mut r = vec![0.0f64; d];
            for patch in chunk {
                let proj: f64 = patch.iter().sum::<f64>() * dc;
                for (ri, &xi) in r.iter_mut().zip(patch.iter()) {
                    *ri = xi - proj * dc;
                }
                for a in 0..d {
                    let ra = r[a];
                    let row = &mut acc[a * d..(a + 1) * d];
                    for (b, &rb) in r.iter().enumerate().skip(a) {
                        row[b] += ra * rb;
                    }
                }
            }
            acc
        })
        .collect();

    let mut cov = vec![0.0f64; d * d];
    for partial in partials {
        for (c, p) in cov.iter_mut().zip(partial) {
            *c += p;
        }
    }
    let n = patches.len() as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / n;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    cov
}

/// Columns 1..d of the Householder reflector mapping e0 to the DC direction:
/// an orthonormal basis of the DC-orthogonal subspace.
fn householder_completion(d: usize, dc: f64) -> Vec<Vec<f64>> {
    // H = I - 2 u u^T / (u^T u), u = v - e0 with v the unit DC vector.
    let mut u = vec![dc; d];
    u[0] -= 1.0;
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let mut cols = Vec::with_capacity(d - 1);
    for j in 1..d {
        let mut col = vec![0.0f64; d];
        for (i, c) in col.iter_mut().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            *c = delta - 2.0 * u[i] * u[j] / uu;
        }
        cols.push(col);
    }
    cols
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix, returning
/// (eigenvalues, eigenvectors as rows) sorted by descending eigenvalue.
/// Sweeps run until the off-diagonal Frobenius norm drops below
/// `1e-12 * max(1, ||A||_F)`.
pub(crate) fn jacobi_eigen_sym(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut v = vec![0.0f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-12 * frob.max(1.0);

    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += a[p * n + q] * a[p * n + q];
            }
        }
        (2.0 * s).sqrt()
    };

    for _sweep in 0..100 {
        if off(&a) < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for i in 0..n {
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p * n + i];
                    let aqi = a[q * n + i];
                    a[p * n + i] = c * api - s * aqi;
                    a[q * n + i] = s * api + c * aqi;
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .partial_cmp(&a[i * n + i])
            .unwrap()
            .then(i.cmp(&j))
    });
    let eigvals: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let eigvecs: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
        .collect();
    (eigvals, eigvecs)
}

/// Apply every kernel of the unit to every stride-1 patch of the block.
pub fn transform(block: &Block, unit: &SaabUnit) -> ResponseCube {
    let shape = unit.shape;
    let g = shape.grid_side();
    let d = shape.dim();
    let mut grid = vec![0.0f64; g * g * d];
    let mut patch = vec![0.0f64; d];
    for i in 0..g {
        for j in 0..g {
            fill_patch(block, i, j, shape.s, &mut patch);
            let out = &mut grid[(i * g + j) * d..(i * g + j + 1) * d];
            for (k, kernel) in unit.kernels.iter().enumerate() {
                out[k] = dot(kernel, &patch);
            }
        }
    }
    ResponseCube { shape, grid }
}

/// Channel `k` of the cube, flattened in raster order: the feature vector a
/// per-channel classifier consumes. Length `(17-s)^2`.
pub fn channel_features(cube: &ResponseCube, k: usize) -> Result<Vec<f64>> {
    let d = cube.shape.dim();
    if k >= d {
        return Err(Error::IndexOutOfRange { k, dim: d });
    }
    let n = cube.shape.responses();
    Ok((0..n).map(|pos| cube.grid[pos * d + k]).collect())
}

/// Single-channel response plane computed directly from the block; equal to
/// `channel_features(&transform(block, unit), k)` without building the cube.
pub fn channel_plane(block: &Block, kernel: &[f64], shape: FilterShape) -> Vec<f64> {
    let g = shape.grid_side();
    let mut out = Vec::with_capacity(g * g);
    let mut patch = vec![0.0f64; shape.dim()];
    for i in 0..g {
        for j in 0..g {
            fill_patch(block, i, j, shape.s, &mut patch);
            out.push(dot(kernel, &patch));
        }
    }
    out
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn constant_block(v: f64) -> Block {
        Block {
            x0: 0,
            y0: 0,
            data: vec![v; 768],
        }
    }

    fn random_block(seed: u64) -> Block {
        let mut rng = seeds::rng_for(seed, 0xB10C, 0);
        Block {
            x0: 0,
            y0: 0,
            data: (0..768).map(|_| rng.random_range(0.0..1.0)).collect(),
        }
    }

    fn random_patches(n: usize, shape: FilterShape, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeds::rng_for(seed, 0x7A7C, 0);
        (0..n)
            .map(|_| (0..shape.dim()).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn patch_geometry() {
        let b = random_block(1);
        for (s, count, dim) in [(2usize, 225usize, 12usize), (3, 196, 27), (4, 169, 48)] {
            let shape = FilterShape::new(s).unwrap();
            let patches = extract_patches(&b, shape);
            assert_eq!(patches.len(), count);
            assert!(patches.iter().all(|p| p.len() == dim));
        }
    }

    #[test]
    fn constant_block_patches_are_constant() {
        let b = constant_block(0.4);
        let patches = extract_patches(&b, FilterShape::new(3).unwrap());
        for p in patches {
            assert!(p.iter().all(|&x| (x - 0.4).abs() < 1e-12));
        }
    }

    #[test]
    fn patch_flattening_order() {
        // Value encodes (x, y, c); patch at (i=0, j=0) must come out in
        // row, column, channel order.
        let mut b = constant_block(0.0);
        for y in 0..16 {
            for x in 0..16 {
                for c in 0..3 {
                    b.data[(y * 16 + x) * 3 + c] = (y * 100 + x * 10 + c) as f64;
                }
            }
        }
        let shape = FilterShape::new(2).unwrap();
        let patches = extract_patches(&b, shape);
        let expect = [
            0.0, 1.0, 2.0, // (x=0,y=0) channels
            10.0, 11.0, 12.0, // (x=1,y=0)
            100.0, 101.0, 102.0, // (x=0,y=1)
            110.0, 111.0, 112.0, // (x=1,y=1)
        ];
        assert_eq!(patches[0], expect);
        // Raster order: second patch shifts one column right.
        assert_eq!(patches[1][0], 10.0);
        // Row stride: patch index grid_side shifts one row down.
        assert_eq!(patches[15][0], 100.0);
    }

    #[test]
    fn dc_kernel_value() {
        let shape = FilterShape::new(2).unwrap();
        let unit = learn_unit(&random_patches(500, shape, 3), shape).unwrap();
        let expect = 1.0 / 12f64.sqrt();
        for &w in &unit.kernels[0] {
            assert!((w - expect).abs() < 1e-15);
        }
        assert!((expect - 0.288675).abs() < 1e-6);
    }

    #[test]
    fn insufficient_patches_rejected() {
        let shape = FilterShape::new(4).unwrap();
        let patches = random_patches(100, shape, 1);
        match learn_unit(&patches, shape) {
            Err(Error::InsufficientPatches { required: 480, .. }) => {}
            other => panic!("expected InsufficientPatches, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_input_yields_orthonormal_completion() {
        let shape = FilterShape::new(2).unwrap();
        let patches = vec![vec![0.7; 12]; 200];
        let unit = learn_unit(&patches, shape).unwrap();
        assert!(unit.degenerate);
        assert!(unit.eigenvalues.iter().all(|&l| l == 0.0));
        assert_gram_identity(&unit, 1e-12);
    }

    fn assert_gram_identity(unit: &SaabUnit, tol: f64) {
        let d = unit.shape.dim();
        for a in 0..d {
            for b in 0..d {
                let g = dot(&unit.kernels[a], &unit.kernels[b]);
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (g - expect).abs() < tol,
                    "gram[{a}][{b}] = {g} (s={})",
                    unit.shape.s
                );
            }
        }
    }

    #[test]
    fn learned_units_are_orthonormal_with_descending_eigenvalues() {
        for s in 2..=4 {
            let shape = FilterShape::new(s).unwrap();
            let unit = learn_unit(&random_patches(800, shape, s as u64), shape).unwrap();
            assert!(!unit.degenerate);
            assert_gram_identity(&unit, 1e-8);
            for w in unit.eigenvalues.windows(2) {
                assert!(w[0] >= w[1]);
            }
            assert!(unit.eigenvalues.iter().all(|&l| l >= 0.0));
            // AC kernels orthogonal to the constant vector.
            for k in 1..shape.dim() {
                let s: f64 = unit.kernels[k].iter().sum();
                assert!(s.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn kernels_match_dense_eigensolver() {
        // Independent oracle: nalgebra's symmetric eigensolver on a
        // covariance assembled by plain loops.
        let shape = FilterShape::new(3).unwrap();
        let d = shape.dim();
        let patches = random_patches(500, shape, 17);
        let unit = learn_unit(&patches, shape).unwrap();

        let dc = 1.0 / (d as f64).sqrt();
        let mut cov = nalgebra::DMatrix::<f64>::zeros(d, d);
        for p in &patches {
            let proj: f64 = p.iter().sum::<f64>() * dc;
            let r: Vec<f64> = p.iter().map(|&x| x - proj * dc).collect();
            for a in 0..d {
                for b in 0..d {
                    cov[(a, b)] += r[a] * r[b];
                }
            }
        }
        cov /= patches.len() as f64;
        let eig = nalgebra::SymmetricEigen::new(cov);
        let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
            .collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

        for k in 1..d {
            let (lambda, mut v) = pairs[k - 1].clone();
            fix_sign(&mut v);
            assert!((lambda - unit.eigenvalues[k - 1]).abs() < 1e-9);
            for (a, b) in v.iter().zip(&unit.kernels[k]) {
                assert!((a - b).abs() < 1e-6, "kernel {k} mismatch: {a} vs {b}");
            }
        }
    }

    #[test]
    fn transform_constant_block() {
        let shape = FilterShape::new(2).unwrap();
        let unit = learn_unit(&random_patches(500, shape, 3), shape).unwrap();
        let v = 0.6;
        let cube = transform(&constant_block(v), &unit);
        let d = shape.dim();
        let expect_dc = v * (d as f64).sqrt();
        for pos in 0..shape.responses() {
            assert!((cube.grid[pos * d] - expect_dc).abs() < 1e-9);
            for k in 1..d {
                assert!(cube.grid[pos * d + k].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn transform_preserves_energy() {
        let shape = FilterShape::new(4).unwrap();
        let unit = learn_unit(&random_patches(800, shape, 5), shape).unwrap();
        let block = random_block(9);
        let cube = transform(&block, &unit);
        let d = shape.dim();
        let patches = extract_patches(&block, shape);
        for (pos, patch) in patches.iter().enumerate() {
            let energy: f64 = patch.iter().map(|x| x * x).sum();
            let response: f64 = cube.grid[pos * d..(pos + 1) * d]
                .iter()
                .map(|x| x * x)
                .sum();
            assert!((energy - response).abs() <= 1e-6 * energy.max(1e-12));
        }
    }

    #[test]
    fn transform_matches_naive_oracle() {
        let shape = FilterShape::new(3).unwrap();
        let unit = learn_unit(&random_patches(600, shape, 21), shape).unwrap();
        let block = random_block(4);
        let cube = transform(&block, &unit);
        let g = shape.grid_side();
        let d = shape.dim();
        for i in 0..g {
            for j in 0..g {
                for k in 0..d {
                    let mut acc = 0.0f64;
                    let mut idx = 0;
                    for r in 0..shape.s {
                        for c in 0..shape.s {
                            for ch in 0..3 {
                                acc += unit.kernels[k][idx]
                                    * block.get(j + c, i + r, ch);
                                idx += 1;
                            }
                        }
                    }
                    assert_eq!(acc, cube.grid[(i * g + j) * d + k]);
                }
            }
        }
    }

    #[test]
    fn channel_features_extracts_planes() {
        let shape = FilterShape::new(2).unwrap();
        let unit = learn_unit(&random_patches(500, shape, 3), shape).unwrap();
        let block = random_block(2);
        let cube = transform(&block, &unit);
        let d = shape.dim();

        let mut concat = Vec::new();
        for k in 0..d {
            let f = channel_features(&cube, k).unwrap();
            assert_eq!(f.len(), 225);
            concat.extend(f);
        }
        // Concatenating all channel features is a permutation of the cube.
        let mut a = concat;
        let mut b = cube.grid.clone();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(a, b);

        assert!(matches!(
            channel_features(&cube, 12),
            Err(Error::IndexOutOfRange { k: 12, dim: 12 })
        ));
    }

    #[test]
    fn channel_plane_matches_cube_extraction() {
        let shape = FilterShape::new(4).unwrap();
        let unit = learn_unit(&random_patches(600, shape, 8), shape).unwrap();
        let block = random_block(6);
        let cube = transform(&block, &unit);
        for k in [0usize, 7, 47] {
            let direct = channel_plane(&block, &unit.kernels[k], shape);
            let via_cube = channel_features(&cube, k).unwrap();
            assert_eq!(direct, via_cube);
        }
    }

    #[test]
    fn patch_sampling_is_deterministic_and_capped() {
        let img = crate::synthgen::gen_real(
            &crate::synthgen::SynthConfig {
                n_per_class: 1,
                side: 64,
                seed: 2,
                upsample_factor: 4,
            },
            0,
        );
        let blocks = crate::blocks::partition(&img);
        let refs: Vec<&Block> = blocks.iter().collect();
        let shape = FilterShape::new(2).unwrap();
        let a = sample_training_patches(&refs, shape, 1000, 7);
        let b = sample_training_patches(&refs, shape, 1000, 7);
        assert_eq!(a.len(), 1000);
        assert_eq!(a, b);
        let all = sample_training_patches(&refs, shape, usize::MAX, 7);
        assert_eq!(all.len(), 16 * 225);
    }
}
