//! Deterministic symmetric eigendecomposition and the two-class whitening
//! transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{multi_mode_product, DenseTensor, Matrix};

/// Sweep limit for [`eig_symmetric`].
pub const MAX_SWEEPS: usize = 100;
/// Convergence threshold on off-diagonal Frobenius mass, relative to `||m||_F`.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;
/// Default relative eigenvalue floor used by [`build_whitening`].
pub const DEFAULT_WHITENING_EPSILON: f64 = 1e-10;

const SYMMETRY_TOLERANCE: f64 = 1e-8;
const PSD_TOLERANCE: f64 = 1e-8;

/// Eigenvalues in descending order with matching unit eigenvectors stored as
/// columns. Each eigenvector has its largest-magnitude entry positive, the
/// lowest index winning ties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenSystem {
    /// `V diag(values) V^T`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        Matrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| self.vectors.get(i, k) * self.values[k] * self.vectors.get(j, k)).sum()
        })
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Rotations visit pivots `(p, q)`, `p < q`, in row order every sweep, so the
/// output is a pure function of the input bits. Iteration stops once the
/// off-diagonal Frobenius mass drops below `1e-12 * ||m||_F`; failing that
/// within [`MAX_SWEEPS`] sweeps is an error.
pub fn eig_symmetric(m: &Matrix) -> Result<EigenSystem> {
    if !m.is_square() {
        return Err(Error::shape(format!("eigendecomposition needs a square matrix, got {:?}", m.shape())));
    }
    let n = m.rows();
    let norm = m.frobenius_norm();
    if m.asymmetry() > SYMMETRY_TOLERANCE * norm.max(1.0) {
        return Err(Error::invalid(format!("matrix is not symmetric (asymmetry {:e})", m.asymmetry())));
    }
    let mut a = m.symmetrized().into_data();
    let mut v = Matrix::identity(n).into_data();
    let threshold = OFF_DIAGONAL_TOLERANCE * norm;

    let off_mass = |a: &[f64]| {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += a[p * n + q] * a[p * n + q];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_mass(&a);
        if off <= threshold {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off_diagonal: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps pivot order among equal eigenvalues.
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));

    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut column: Vec<f64> = (0..n).map(|k| v[k * n + src]).collect();
        fix_sign(&mut column);
        for (k, x) in column.into_iter().enumerate() {
            vectors.set(k, col, x);
        }
    }
    Ok(EigenSystem { values, vectors })
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Whitening of one mode: `z = diag(lambda)^(-1/2) V^T` from the
/// eigensystem of the summed two-class scatter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeWhitening {
    pub z: Matrix,
    pub eigen: EigenSystem,
    /// Number of eigenvalues raised to the floor before inversion.
    pub clipped: usize,
}

/// Per-mode whitening matrices with their source eigensystems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhiteningTransform {
    pub modes: Vec<ModeWhitening>,
    pub epsilon: f64,
}

impl WhiteningTransform {
    pub fn matrices(&self) -> Vec<Matrix> {
        self.modes.iter().map(|m| m.z.clone()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modes.iter().map(|m| m.z.rows()).collect()
    }

    /// `t x_1 Z_1 x_2 Z_2 ... x_N Z_N`.
    pub fn apply(&self, t: &DenseTensor) -> Result<DenseTensor> {
        multi_mode_product(t, &self.matrices())
    }
}

/// Builds `Z` from the per-class scatter matrices `r1` and `r2`.
///
/// Eigenvalues of `r1 + r2` below `epsilon * lambda_max` are raised to that
/// floor. Without clipping `Z (r1 + r2) Z^T = I`.
pub fn build_whitening(r1: &Matrix, r2: &Matrix, epsilon: f64) -> Result<ModeWhitening> {
    if r1.shape() != r2.shape() {
        return Err(Error::shape(format!("class scatters differ in shape: {:?} vs {:?}", r1.shape(), r2.shape())));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("whitening epsilon must be finite and nonnegative, got {epsilon}")));
    }
    let sum = r1.add(r2)?;
    let eigen = eig_symmetric(&sum)?;
    let largest = eigen.values[0];
    if largest <= 0.0 {
        return Err(Error::invalid("summed class scatter is zero; the mode carries no variation"));
    }
    let smallest = *eigen.values.last().expect("nonempty");
    if smallest < -PSD_TOLERANCE * largest {
        return Err(Error::NotPositiveSemidefinite { value: smallest, largest });
    }
    let floor = epsilon * largest;
    let mut clipped = 0;
    let inv_sqrt: Vec<f64> = eigen
        .values
        .iter()
        .map(|&l| {
            let l = if l < floor || l <= 0.0 {
                clipped += 1;
                floor.max(f64::MIN_POSITIVE)
            } else {
                l
            };
            1.0 / l.sqrt()
        })
        .collect();
    let n = sum.rows();
    let z = Matrix::from_fn(n, n, |i, j| inv_sqrt[i] * eigen.vectors.get(j, i));
    Ok(ModeWhitening { z, eigen, clipped })
}
