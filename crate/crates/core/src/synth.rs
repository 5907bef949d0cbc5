//! Seeded synthetic datasets with known structure.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataio::{CubeDataset, LabeledDataset};
use crate::error::{Error, Result};
use crate::tensor::{multi_mode_product, DenseTensor, Matrix};

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> DenseTensor {
    DenseTensor::from_fn(dims, |_| gaussian(rng))
}

/// Random `n x n` orthogonal matrix: Gram-Schmidt on Gaussian columns.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
        for _ in 0..2 {
            for c in &cols {
                let p: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= p * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    Matrix::from_fn(n, n, |i, j| cols[j][i])
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    random_orthogonal(rng, n).col(0)
}

fn outer(vectors: &[Vec<f64>]) -> DenseTensor {
    let dims: Vec<usize> = vectors.iter().map(Vec::len).collect();
    DenseTensor::from_fn(&dims, |idx| idx.iter().zip(vectors).map(|(&i, v)| v[i]).product())
}

fn default_names() -> [String; 2] {
    ["class_a".to_string(), "class_b".to_string()]
}

/// Two classes of vectors sharing eigen-directions but with mirrored
/// variance profiles along them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CspVectorsParams {
    pub dim: usize,
    pub per_class: usize,
    /// Variances of the first class along the shared directions.
    pub first_variances: Vec<f64>,
    /// Variances of the second class along the same directions.
    pub second_variances: Vec<f64>,
}

impl Default for CspVectorsParams {
    fn default() -> Self {
        CspVectorsParams {
            dim: 8,
            per_class: 100,
            first_variances: vec![9.0, 4.0, 2.0, 1.0, 1.0, 0.5, 0.25, 0.1],
            second_variances: vec![0.1, 0.25, 0.5, 1.0, 1.0, 2.0, 4.0, 9.0],
        }
    }
}

pub fn csp_vectors(p: &CspVectorsParams, seed: u64) -> Result<LabeledDataset> {
    if p.first_variances.len() != p.dim || p.second_variances.len() != p.dim {
        return Err(Error::invalid("variance profiles must have length dim"));
    }
    let mut rng = rng_for(seed);
    let q = random_orthogonal(&mut rng, p.dim);
    let mut samples = Vec::with_capacity(2 * p.per_class);
    let mut labels = Vec::with_capacity(2 * p.per_class);
    for (label, variances) in [(0u8, &p.first_variances), (1, &p.second_variances)] {
        for _ in 0..p.per_class {
            let z: Vec<f64> = variances.iter().map(|v| v.sqrt() * gaussian(&mut rng)).collect();
            let x: Vec<f64> = (0..p.dim).map(|i| (0..p.dim).map(|k| q.get(i, k) * z[k]).sum()).collect();
            samples.push(DenseTensor::new(vec![p.dim], x)?);
            labels.push(label);
        }
    }
    LabeledDataset::from_labeled(samples, labels, default_names())
}

/// Classes whose separating information lives in directions of low pooled
/// variance.
///
/// Every sample carries a Kronecker-structured background
/// `G x_1 Q_1 D_1 x_2 Q_2 D_2 x_3 Q_3 D_3` whose per-mode scales `D_n` are
/// large on the first `strong` axes and `weak_scale` on the rest. Class 0
/// adds `c * d_0` and class 1 adds `c * d_1`, with `c ~ N(signal_mean,
/// signal_std^2)` and `d_i` the rank-1 tensors built from rotated weak axes.
/// The classes therefore differ in covariance, and in mean, only along
/// `d_0` and `d_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowVarianceParams {
    pub dims: Vec<usize>,
    pub per_class: usize,
    /// Background standard deviations along the strong axes of every mode.
    pub strong_scales: Vec<f64>,
    pub weak_scale: f64,
    pub signal_mean: f64,
    pub signal_std: f64,
}

impl Default for LowVarianceParams {
    fn default() -> Self {
        LowVarianceParams {
            dims: vec![6, 6, 8],
            per_class: 300,
            strong_scales: vec![1.0, 0.9, 0.8, 0.7],
            weak_scale: 0.1,
            signal_mean: 1.4,
            signal_std: 0.4,
        }
    }
}

impl LowVarianceParams {
    fn mode_scales(&self, extent: usize) -> Vec<f64> {
        (0..extent).map(|i| self.strong_scales.get(i).copied().unwrap_or(self.weak_scale)).collect()
    }

    /// Expected share of pooled total scatter carried by the two
    /// discriminative directions.
    pub fn discriminative_fraction(&self) -> f64 {
        let background: f64 =
            self.dims.iter().map(|&d| self.mode_scales(d).iter().map(|s| s * s).sum::<f64>()).product();
        // Each direction is active in half the samples.
        let per_direction = 0.5 * self.signal_std.powi(2) + 0.25 * self.signal_mean.powi(2);
        let weak_bg = self.weak_scale.powi(2 * self.dims.len() as i32);
        let disc = 2.0 * (per_direction + weak_bg);
        disc / (background + 2.0 * per_direction)
    }
}

pub fn low_variance_discriminant(p: &LowVarianceParams, seed: u64) -> Result<LabeledDataset> {
    let strong = p.strong_scales.len();
    if p.dims.iter().any(|&d| d < strong + 2) {
        return Err(Error::invalid("every extent needs two weak axes beyond the strong ones"));
    }
    let mut rng = rng_for(seed);
    let rotations: Vec<Matrix> = p.dims.iter().map(|&d| random_orthogonal(&mut rng, d)).collect();
    let mixing: Vec<Matrix> = rotations
        .iter()
        .zip(&p.dims)
        .map(|(q, &d)| {
            let scales = p.mode_scales(d);
            Matrix::from_fn(d, d, |i, j| q.get(i, j) * scales[j])
        })
        .collect();
    // Class i uses the (d - 2 + i)-th rotated axis of every mode.
    let directions: Vec<DenseTensor> = (0..2)
        .map(|i| outer(&rotations.iter().zip(&p.dims).map(|(q, &d)| q.col(d - 2 + i)).collect::<Vec<_>>()))
        .collect();
    let mut samples = Vec::with_capacity(2 * p.per_class);
    let mut labels = Vec::with_capacity(2 * p.per_class);
    for label in 0..2u8 {
        for _ in 0..p.per_class {
            let background = multi_mode_product(&gaussian_tensor(&mut rng, &p.dims), &mixing)?;
            let c = p.signal_mean + p.signal_std * gaussian(&mut rng);
            samples.push(background.add(&directions[label as usize].scale(c))?);
            labels.push(label);
        }
    }
    LabeledDataset::from_labeled(samples, labels, default_names())
}

/// Labels from the sign of `<X, u o v>` for Gaussian `X`, keeping only
/// samples at least `margin` from the hyperplane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rank1PlantedParams {
    pub dims: Vec<usize>,
    pub count: usize,
    pub margin: f64,
}

impl Default for Rank1PlantedParams {
    fn default() -> Self {
        Rank1PlantedParams { dims: vec![5, 4], count: 200, margin: 0.5 }
    }
}

/// Returns the dataset and the planted unit factors.
pub fn rank1_planted(p: &Rank1PlantedParams, seed: u64) -> Result<(LabeledDataset, Vec<Vec<f64>>)> {
    let mut rng = rng_for(seed);
    let factors: Vec<Vec<f64>> = p.dims.iter().map(|&d| unit_vector(&mut rng, d)).collect();
    let w = outer(&factors);
    let mut samples = Vec::with_capacity(p.count);
    let mut labels = Vec::with_capacity(p.count);
    while samples.len() < p.count {
        let x = gaussian_tensor(&mut rng, &p.dims);
        let s: f64 = x.data().iter().zip(w.data()).map(|(a, b)| a * b).sum();
        if s.abs() >= p.margin {
            labels.push(u8::from(s > 0.0));
            samples.push(x);
        }
    }
    Ok((LabeledDataset::from_labeled(samples, labels, default_names())?, factors))
}

/// Isotropic unit-variance Gaussian classes whose means are `separation`
/// apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobsParams {
    pub dims: Vec<usize>,
    pub per_class: usize,
    pub separation: f64,
}

impl Default for BlobsParams {
    fn default() -> Self {
        BlobsParams { dims: vec![3, 3, 2], per_class: 100, separation: 10.0 }
    }
}

pub fn gaussian_blobs(p: &BlobsParams, seed: u64) -> Result<LabeledDataset> {
    let mut rng = rng_for(seed);
    let len: usize = p.dims.iter().product();
    let direction = unit_vector(&mut rng, len);
    let offset = DenseTensor::new(p.dims.clone(), direction.iter().map(|x| x * p.separation).collect())?;
    let mut samples = Vec::with_capacity(2 * p.per_class);
    let mut labels = Vec::with_capacity(2 * p.per_class);
    for label in 0..2u8 {
        for _ in 0..p.per_class {
            let x = gaussian_tensor(&mut rng, &p.dims);
            samples.push(if label == 1 { x.add(&offset)? } else { x });
            labels.push(label);
        }
    }
    LabeledDataset::from_labeled(samples, labels, default_names())
}

/// A blocky hyperspectral scene: `blocks x blocks` tiles, each holding one
/// class (id 0 leaves it unlabeled), pixels drawn around smooth class
/// spectra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeParams {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub classes: u32,
    pub block: usize,
    pub noise: f64,
    pub positive_ids: Vec<u32>,
}

impl Default for CubeParams {
    fn default() -> Self {
        CubeParams { height: 32, width: 32, bands: 16, classes: 4, block: 8, noise: 0.3, positive_ids: vec![1, 2] }
    }
}

pub fn hyperspectral_cube(p: &CubeParams, seed: u64) -> Result<CubeDataset> {
    if p.block == 0 || p.classes == 0 {
        return Err(Error::invalid("block size and class count must be positive"));
    }
    let mut rng = rng_for(seed);
    let spectra: Vec<Vec<f64>> = (0..p.classes)
        .map(|_| {
            let (a, b, phase) = (gaussian(&mut rng), gaussian(&mut rng), gaussian(&mut rng));
            (0..p.bands)
                .map(|k| {
                    let t = k as f64 / p.bands as f64;
                    1.0 + 0.5 * a * t + 0.5 * b * (std::f64::consts::TAU * t + phase).sin()
                })
                .collect()
        })
        .collect();
    let tiles_x = p.width.div_ceil(p.block);
    let gt_of = |x: usize, y: usize| -> u32 {
        let tile = (y / p.block) * tiles_x + x / p.block;
        (tile as u32 * 7 + 3) % (p.classes + 1)
    };
    let ground_truth = DenseTensor::from_fn(&[p.height, p.width], |i| gt_of(i[1], i[0]) as f64);
    let background = vec![0.8; p.bands];
    let mut data = Vec::with_capacity(p.height * p.width * p.bands);
    for y in 0..p.height {
        for x in 0..p.width {
            let id = gt_of(x, y);
            let gain = 1.0 + 0.1 * gaussian(&mut rng);
            let row = if id == 0 { &background } else { &spectra[id as usize - 1] };
            for &base in row {
                data.push(gain * base + p.noise * gaussian(&mut rng));
            }
        }
    }
    let cube = DenseTensor::new(vec![p.height, p.width, p.bands], data)?;
    let names: BTreeMap<u32, String> = (1..=p.classes).map(|c| (c, format!("material_{c}"))).collect();
    CubeDataset::new(cube, &ground_truth, names)
}
