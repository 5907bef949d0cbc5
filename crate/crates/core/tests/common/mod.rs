//! Independent oracles built on nalgebra, shared by the integration tests.
#![allow(dead_code)]

use cmp_core::tensor::{DenseTensor, Matrix};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> DenseTensor {
    DenseTensor::from_fn(dims, |_| rng.random_range(-1.0..1.0))
}

/// `rows x cols` matrix with orthonormal columns (QR of a random matrix).
pub fn random_orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let a = to_na(&random_matrix(rng, rows, rows));
    let q = a.qr().q();
    from_na(&q.columns(0, cols).into_owned())
}

/// Random symmetric PSD matrix `A A^T` with `A` of size `n x rank`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> Matrix {
    let a = random_matrix(rng, n, rank);
    a.matmul(&a.transpose()).unwrap()
}

/// Sine of the largest principal angle between the column spans of `a` and
/// `b` (columns need not be orthonormal). Spans of different dimension
/// return 1.
pub fn max_principal_angle(a: &Matrix, b: &Matrix) -> f64 {
    if a.cols() != b.cols() {
        return 1.0;
    }
    let qa = to_na(a).qr().q();
    let qb = to_na(b).qr().q();
    let qa = qa.columns(0, a.cols());
    let qb = qb.columns(0, b.cols());
    let residual = qb - qa * (qa.transpose() * qb);
    residual.singular_values().max().asin()
}

/// Descending eigenpairs from nalgebra.
pub fn eig_desc(m: &Matrix) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(to_na(m));
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| e.eigenvalues[j].total_cmp(&e.eigenvalues[i]));
    let values = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.rows(), m.rows(), |r, c| e.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Columns `idx` of an nalgebra matrix as a crate matrix.
pub fn columns(m: &DMatrix<f64>, idx: &[usize]) -> Matrix {
    Matrix::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
}

/// Classic CSP filters: solves `R1 w = lambda (R1 + R2) w` through the
/// Cholesky factor `L L^T = R1 + R2` and returns the `k` filters with the
/// largest and the `k` with the smallest generalized eigenvalues.
pub fn csp_filters(r1: &Matrix, r2: &Matrix, k: usize) -> Matrix {
    let sum = to_na(r1) + to_na(r2);
    let l = sum.cholesky().expect("positive definite").l();
    let l_inv = l.clone().try_inverse().unwrap();
    let sym = &l_inv * to_na(r1) * l_inv.transpose();
    let (_, vectors) = eig_desc(&from_na(&((&sym + sym.transpose()) * 0.5)));
    let w = l_inv.transpose() * vectors;
    let n = w.ncols();
    let idx: Vec<usize> = (0..k).chain(n - k..n).collect();
    columns(&w, &idx)
}

/// Covariance of vectorized samples about their mean.
pub fn vector_covariance(samples: &[DenseTensor]) -> Matrix {
    let n = samples[0].len();
    let m = samples.len() as f64;
    let mean: Vec<f64> = (0..n).map(|i| samples.iter().map(|s| s.data()[i]).sum::<f64>() / m).collect();
    Matrix::from_fn(n, n, |i, j| {
        samples.iter().map(|s| (s.data()[i] - mean[i]) * (s.data()[j] - mean[j])).sum::<f64>() / m
    })
}
