//! Dense real tensors, matrices, and the multilinear primitives built on them.
//!
//! Storage is row-major with the last index varying fastest. Modes are
//! 1-based in every public function.
//!
//! Mode-`n` matricization lays the remaining indices out in the cyclic order
//! `n+1, ..., N, 1, ..., n-1`, with `n+1` varying slowest. With that layout
//! the projection `A x_1 U_1^T ... x_N U_N^T` matricizes to
//! `U_n^T * A_(n) * (U_{n+1} (x) ... (x) U_N (x) U_1 (x) ... (x) U_{n-1})`
//! with no permutation matrices involved.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples summed per work unit in the parallel scatter reductions. Fixed so
/// that the reduction tree, and therefore the rounding, does not depend on
/// the number of worker threads.
pub(crate) const REDUCTION_CHUNK: usize = 32;

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!("matrix extents must be positive, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {pos} is {}", data[pos])));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix extents must be positive");
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Matrix::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// A single column vector.
    pub fn column(values: &[f64]) -> Self {
        Matrix { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * self^T`.
    pub fn gram_rows(&self) -> Matrix {
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            let ri = self.row(i);
            for j in i..n {
                let v: f64 = ri.iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                out.data[i * n + j] = v;
                out.data[j * n + i] = v;
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub(crate) fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry of `self - self^T`.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `(self + self^T) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    /// Columns `idx`, in the order given.
    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, idx.len(), |i, j| self.get(i, idx[j]))
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        Matrix::from_fn(r, c, |i, j| {
            self.get(i / other.rows, j / other.cols) * other.get(i % other.rows, j % other.cols)
        })
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// N-way dense real array stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_dims(&dims)?;
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::shape(format!(
                "dims {dims:?} need {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("tensor entry {pos} is {}", data[pos])));
        }
        Ok(DenseTensor { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        check_dims(dims).expect("invalid tensor dims");
        DenseTensor { dims: dims.to_vec(), data: vec![0.0; dims.iter().product()] }
    }

    /// Fills entries from a function of the 0-based multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = DenseTensor::zeros(dims);
        let mut idx = vec![0usize; dims.len()];
        for v in t.data.iter_mut() {
            *v = f(&idx);
            increment(&mut idx, dims);
        }
        t
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of modes N.
    #[inline]
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Entry at a 0-based multi-index.
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    fn offset(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.dims.len());
        idx.iter().zip(&self.dims).fold(0, |acc, (i, d)| {
            assert!(i < d, "index out of bounds");
            acc * d + i
        })
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &DenseTensor, f: impl Fn(f64, f64) -> f64) -> Result<DenseTensor> {
        if self.dims != other.dims {
            return Err(Error::shape(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(DenseTensor { dims: self.dims.clone(), data })
    }

    pub fn scale(&self, s: f64) -> DenseTensor {
        DenseTensor { dims: self.dims.clone(), data: self.data.iter().map(|v| v * s).collect() }
    }

    /// Same data viewed with new extents of equal product.
    pub fn reshape(self, dims: Vec<usize>) -> Result<DenseTensor> {
        check_dims(&dims)?;
        if dims.iter().product::<usize>() != self.data.len() {
            return Err(Error::shape(format!("cannot reshape {:?} to {dims:?}", self.dims)));
        }
        Ok(DenseTensor { dims, data: self.data })
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::shape("a tensor needs at least one mode"));
    }
    if dims.contains(&0) {
        return Err(Error::shape(format!("extents must be positive, got {dims:?}")));
    }
    Ok(())
}

fn increment(idx: &mut [usize], dims: &[usize]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < dims[k] {
            return;
        }
        idx[k] = 0;
    }
}

/// Converts a 1-based mode to a 0-based axis.
pub(crate) fn axis_of(mode: usize, order: usize) -> Result<usize> {
    if mode == 0 || mode > order {
        return Err(Error::ModeOutOfRange { mode, order });
    }
    Ok(mode - 1)
}

/// Axis order of the mode-`n` unfolding: `n` first, then the cyclic rest.
fn cyclic_axes(axis: usize, order: usize) -> Vec<usize> {
    (0..order).map(|k| (axis + k) % order).collect()
}

/// Copies `t` into a row-major buffer whose axes follow `perm`.
fn permute(dims: &[usize], data: &[f64], perm: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let n = dims.len();
    let mut strides = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let new_strides: Vec<usize> = perm.iter().map(|&p| strides[p]).collect();
    let mut out = Vec::with_capacity(data.len());
    let mut idx = vec![0usize; n];
    let mut src = 0usize;
    for _ in 0..data.len() {
        out.push(data[src]);
        for k in (0..n).rev() {
            idx[k] += 1;
            src += new_strides[k];
            if idx[k] < new_dims[k] {
                break;
            }
            src -= new_strides[k] * new_dims[k];
            idx[k] = 0;
        }
    }
    (new_dims, out)
}

/// Mode-`mode` matricization: an `I_mode x prod(others)` matrix whose
/// columns are the mode fibers, in cyclic column order.
pub fn matricize(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    let axis = axis_of(mode, t.order())?;
    let (dims, data) = permute(&t.dims, &t.data, &cyclic_axes(axis, t.order()));
    let rows = dims[0];
    Ok(Matrix { rows, cols: data.len() / rows, data })
}

/// Inverse of [`matricize`].
pub fn dematricize(m: &Matrix, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
    check_dims(dims)?;
    let axis = axis_of(mode, dims.len())?;
    let rest: usize = dims.iter().enumerate().filter(|(k, _)| *k != axis).map(|(_, d)| d).product();
    if m.rows != dims[axis] || m.cols != rest {
        return Err(Error::shape(format!(
            "mode-{mode} unfolding of {dims:?} is {}x{rest}, got {}x{}",
            dims[axis], m.rows, m.cols
        )));
    }
    let order = dims.len();
    let forward = cyclic_axes(axis, order);
    let permuted_dims: Vec<usize> = forward.iter().map(|&p| dims[p]).collect();
    let mut inverse = vec![0usize; order];
    for (k, &p) in forward.iter().enumerate() {
        inverse[p] = k;
    }
    let (out_dims, data) = permute(&permuted_dims, &m.data, &inverse);
    debug_assert_eq!(out_dims, dims);
    Ok(DenseTensor { dims: out_dims, data })
}

/// n-mode product `t x_mode m`: replaces extent `I_mode` by `m.rows()`.
pub fn mode_product(t: &DenseTensor, m: &Matrix, mode: usize) -> Result<DenseTensor> {
    let axis = axis_of(mode, t.order())?;
    let extent = t.dims[axis];
    if m.cols != extent {
        return Err(Error::shape(format!(
            "mode-{mode} product needs a matrix with {extent} columns, got {}x{}",
            m.rows, m.cols
        )));
    }
    let outer: usize = t.dims[..axis].iter().product();
    let inner: usize = t.dims[axis + 1..].iter().product();
    let out_extent = m.rows;
    let mut out = vec![0.0; outer * out_extent * inner];
    for o in 0..outer {
        let src = &t.data[o * extent * inner..(o + 1) * extent * inner];
        let dst = &mut out[o * out_extent * inner..(o + 1) * out_extent * inner];
        for j in 0..out_extent {
            let dst_fiber = &mut dst[j * inner..(j + 1) * inner];
            for i in 0..extent {
                let w = m.data[j * extent + i];
                if w == 0.0 {
                    continue;
                }
                for (d, s) in dst_fiber.iter_mut().zip(&src[i * inner..(i + 1) * inner]) {
                    *d += w * s;
                }
            }
        }
    }
    let mut dims = t.dims.clone();
    dims[axis] = out_extent;
    Ok(DenseTensor { dims, data: out })
}

/// Applies `t x_1 m_1 x_2 m_2 ... x_N m_N`.
pub fn multi_mode_product(t: &DenseTensor, matrices: &[Matrix]) -> Result<DenseTensor> {
    if matrices.len() != t.order() {
        return Err(Error::shape(format!(
            "need {} matrices for a tensor of order {}, got {}",
            t.order(),
            t.order(),
            matrices.len()
        )));
    }
    let mut out = t.clone();
    for (k, m) in matrices.iter().enumerate() {
        out = mode_product(&out, m, k + 1)?;
    }
    Ok(out)
}

/// Kronecker chain `U_{n+1} (x) ... (x) U_N (x) U_1 (x) ... (x) U_{n-1}`.
/// A single-mode basis yields the 1x1 identity.
pub fn kron_chain(matrices: &[Matrix], mode: usize) -> Result<Matrix> {
    let axis = axis_of(mode, matrices.len())?;
    let order = matrices.len();
    Ok(cyclic_axes(axis, order)
        .into_iter()
        .skip(1)
        .fold(Matrix::identity(1), |acc, k| acc.kron(&matrices[k])))
}

/// `<vec(a), vec(b)>`.
pub fn scalar_product(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::shape(format!("{:?} vs {:?}", a.dims, b.dims)));
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    t.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_samples(samples: &[DenseTensor]) -> Result<&[usize]> {
    let first = samples.first().ok_or_else(|| Error::invalid("empty sample set"))?;
    if let Some(bad) = samples.iter().find(|s| s.dims != first.dims) {
        return Err(Error::shape(format!("sample dims {:?} vs {:?}", bad.dims, first.dims)));
    }
    Ok(&first.dims)
}

/// Elementwise mean of a nonempty set of equal-shape tensors.
pub fn mean_tensor(samples: &[DenseTensor]) -> Result<DenseTensor> {
    let dims = check_samples(samples)?;
    let mut acc = vec![0.0; samples[0].len()];
    for s in samples {
        for (a, v) in acc.iter_mut().zip(&s.data) {
            *a += v;
        }
    }
    let m = samples.len() as f64;
    Ok(DenseTensor { dims: dims.to_vec(), data: acc.into_iter().map(|v| v / m).collect() })
}

/// Average total scatter: mean squared Frobenius distance to the set mean.
pub fn average_total_scatter(samples: &[DenseTensor]) -> Result<f64> {
    let mean = mean_tensor(samples)?;
    let total: f64 = samples
        .iter()
        .map(|s| s.data.iter().zip(&mean.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    Ok(total / samples.len() as f64)
}

/// `(1/M) sum_m (A_(n),m - mean_(n)) (A_(n),m - mean_(n))^T`.
pub fn mode_scatter_matrix(samples: &[DenseTensor], mode: usize, mean: &DenseTensor) -> Result<Matrix> {
    let dims = check_samples(samples)?;
    if mean.dims != dims {
        return Err(Error::shape(format!("mean dims {:?} vs samples {:?}", mean.dims, dims)));
    }
    let axis = axis_of(mode, dims.len())?;
    let extent = dims[axis];
    let sum = chunked_sum(samples.len(), extent, |i| {
        let centered = samples[i].sub(mean)?;
        Ok(matricize(&centered, mode)?.gram_rows())
    })?;
    Ok(sum.scale(1.0 / samples.len() as f64))
}

/// Sums `n x n` matrices produced per item. Work is split into fixed-size
/// chunks, each summed sequentially, and the chunk sums are added in order.
pub(crate) fn chunked_sum<F>(items: usize, n: usize, f: F) -> Result<Matrix>
where
    F: Fn(usize) -> Result<Matrix> + Sync,
{
    let chunks: Vec<Result<Matrix>> = (0..items.div_ceil(REDUCTION_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Matrix::zeros(n, n);
            for i in c * REDUCTION_CHUNK..((c + 1) * REDUCTION_CHUNK).min(items) {
                acc.add_assign(&f(i)?);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Matrix::zeros(n, n);
    for c in chunks {
        total.add_assign(&c?);
    }
    Ok(total)
}
