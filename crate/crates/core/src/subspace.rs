//! Supervised (Common Mode Patterns) and unsupervised (MPCA) tensor subspace
//! learning.
//!
//! Both fitters alternate over modes. For mode `n` they form the sandwiched
//! scatter
//!
//! ```text
//! Phi_n = (1/M) sum_m (A_(n),m - mean_(n)) U_Phi U_Phi^T (A_(n),m - mean_(n))^T
//! ```
//!
//! where `U_Phi` is the Kronecker chain of the partner bases, and refit
//! `U_n` from its eigenvectors. CMP first whitens every mode so that the two
//! class scatters sum to the identity, keeps the full eigenvector set while
//! iterating, and finally retains the leading and trailing eigenvectors of
//! the first class's `Phi_n`: directions most expressive for one class are
//! least expressive for the other. MPCA keeps the top eigenvectors of the
//! pooled scatter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::LabeledDataset;
use crate::eigen::{build_whitening, eig_symmetric, WhiteningTransform, DEFAULT_WHITENING_EPSILON};
use crate::error::{Error, Result};
use crate::tensor::{
    average_total_scatter, chunked_sum, matricize, mean_tensor, mode_product, mode_scatter_matrix,
    multi_mode_product, DenseTensor, Matrix, REDUCTION_CHUNK,
};

const ORTHONORMAL_TOLERANCE: f64 = 1e-8;

/// Per-mode projection matrices `U_n` of shape `I_n x P_n` with orthonormal
/// columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBasis {
    matrices: Vec<Matrix>,
}

impl ProjectionBasis {
    pub fn new(matrices: Vec<Matrix>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::invalid("a projection basis needs at least one mode"));
        }
        for (k, u) in matrices.iter().enumerate() {
            if u.cols() > u.rows() {
                return Err(Error::shape(format!("mode {}: {} columns exceed extent {}", k + 1, u.cols(), u.rows())));
            }
            let gram = u.transpose().matmul(u)?;
            let err = gram.max_abs_diff(&Matrix::identity(u.cols()));
            if err > ORTHONORMAL_TOLERANCE {
                return Err(Error::invalid(format!("mode {} basis is not orthonormal (error {err:e})", k + 1)));
            }
        }
        Ok(ProjectionBasis { matrices })
    }

    pub fn identity(dims: &[usize]) -> Self {
        ProjectionBasis { matrices: dims.iter().map(|&d| Matrix::identity(d)).collect() }
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.matrices
    }

    pub fn order(&self) -> usize {
        self.matrices.len()
    }

    pub fn input_dims(&self) -> Vec<usize> {
        self.matrices.iter().map(Matrix::rows).collect()
    }

    pub fn output_dims(&self) -> Vec<usize> {
        self.matrices.iter().map(Matrix::cols).collect()
    }

    fn transposes(&self) -> Vec<Matrix> {
        self.matrices.iter().map(Matrix::transpose).collect()
    }
}

/// Projects `t` onto the basis: `t x_1 U_1^T ... x_N U_N^T`, whitening
/// every mode first when a transform is given.
pub fn project(basis: &ProjectionBasis, t: &DenseTensor, whitening: Option<&WhiteningTransform>) -> Result<DenseTensor> {
    if t.dims() != basis.input_dims().as_slice() {
        return Err(Error::shape(format!("tensor dims {:?}, basis expects {:?}", t.dims(), basis.input_dims())));
    }
    let t = match whitening {
        Some(w) => w.apply(t)?,
        None => t.clone(),
    };
    multi_mode_product(&t, &basis.transposes())
}

/// Which mean is subtracted inside `Phi_n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiMean {
    /// Mean of the class whose scatter is formed.
    #[default]
    Class,
    /// Mean over both classes.
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Stop once the relative change of the tracked scatter drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative eigenvalue floor for whitening.
    pub epsilon: f64,
    pub phi_mean: PhiMean,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { tol: 1e-6, max_iter: 5, epsilon: DEFAULT_WHITENING_EPSILON, phi_mean: PhiMean::Class }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid(format!("tolerance must be finite and nonnegative, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Convergence trace of an alternating fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    pub converged: bool,
    /// Tracked scatter under the initial basis, then after each iteration.
    pub scatter: Vec<f64>,
    /// Tracked scatter after every single-mode update.
    pub mode_updates: Vec<f64>,
    /// Scatter of the fitting samples before projection.
    pub input_scatter: f64,
    /// Scatter of the fitting samples under the final basis.
    pub projected_scatter: f64,
}

/// How many leading (largest-eigenvalue) and trailing (smallest-eigenvalue)
/// eigenvectors a CMP mode keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSplit {
    pub largest: usize,
    pub smallest: usize,
}

impl ModeSplit {
    pub fn even(total: usize) -> Result<Self> {
        if total == 0 || total % 2 == 1 {
            return Err(Error::invalid(format!(
                "output extent {total} cannot be split evenly between the two classes; pass explicit counts"
            )));
        }
        Ok(ModeSplit { largest: total / 2, smallest: total / 2 })
    }

    pub fn total(&self) -> usize {
        self.largest + self.smallest
    }
}

/// Fitted Common Mode Patterns model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmpModel {
    pub whitening: WhiteningTransform,
    pub basis: ProjectionBasis,
    pub splits: Vec<ModeSplit>,
    /// Class means in the whitened domain, first-listed class first.
    pub class_means: [DenseTensor; 2],
    /// Eigenvalues of the first class's final `Phi_n`, descending, per mode.
    pub phi_eigenvalues: Vec<Vec<f64>>,
    pub class_names: [String; 2],
    pub phi_mean: PhiMean,
    pub fit_report: FitReport,
}

impl CmpModel {
    pub fn project(&self, t: &DenseTensor) -> Result<DenseTensor> {
        project(&self.basis, t, Some(&self.whitening))
    }
}

/// Fitted MPCA model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcaModel {
    pub basis: ProjectionBasis,
    pub global_mean: DenseTensor,
    pub phi_eigenvalues: Vec<Vec<f64>>,
    pub fit_report: FitReport,
}

impl MpcaModel {
    pub fn project(&self, t: &DenseTensor) -> Result<DenseTensor> {
        project(&self.basis, t, None)
    }
}

/// Per-mode whitening from the two class scatters, applied to every sample.
///
/// Class `i` contributes `R_n^(i) = (1/M_i) sum (B_(n) - mean_i)(B_(n) - mean_i)^T`,
/// `Z_n` whitens `R_n^(1) + R_n^(2)`, and each sample becomes
/// `B x_1 Z_1 ... x_N Z_N`.
pub fn normalize(data: &LabeledDataset, epsilon: f64) -> Result<(WhiteningTransform, LabeledDataset)> {
    data.require_both_classes(2)?;
    let dims = data.dims().expect("nonempty").to_vec();
    let classes = [data.class_samples(0), data.class_samples(1)];
    let means = [mean_tensor(&classes[0])?, mean_tensor(&classes[1])?];
    let modes = (1..=dims.len())
        .map(|n| {
            let r1 = mode_scatter_matrix(&classes[0], n, &means[0])?;
            let r2 = mode_scatter_matrix(&classes[1], n, &means[1])?;
            build_whitening(&r1, &r2, epsilon)
        })
        .collect::<Result<Vec<_>>>()?;
    let whitening = WhiteningTransform { modes, epsilon };
    let normalized = data.map_samples(|s| whitening.apply(s))?;
    Ok((whitening, normalized))
}

/// `t x_k U_k^T` for every mode `k` except `skip` (1-based).
fn project_partners(t: &DenseTensor, transposes: &[Matrix], skip: usize) -> Result<DenseTensor> {
    let mut out = t.clone();
    for (k, ut) in transposes.iter().enumerate() {
        if k + 1 != skip {
            out = mode_product(&out, ut, k + 1)?;
        }
    }
    Ok(out)
}

fn check_basis(samples: &[DenseTensor], basis: &ProjectionBasis) -> Result<()> {
    let first = samples.first().ok_or_else(|| Error::invalid("empty sample set"))?;
    if first.dims() != basis.input_dims().as_slice() {
        return Err(Error::shape(format!("samples {:?} vs basis input {:?}", first.dims(), basis.input_dims())));
    }
    Ok(())
}

/// Sandwiched mode scatter `Phi_n` of `samples` about `mean`, using the
/// partner matrices of `basis` (its mode-`mode` matrix is ignored).
pub fn class_phi(samples: &[DenseTensor], mean: &DenseTensor, mode: usize, basis: &ProjectionBasis) -> Result<Matrix> {
    check_basis(samples, basis)?;
    if mean.dims() != samples[0].dims() {
        return Err(Error::shape(format!("mean dims {:?} vs samples {:?}", mean.dims(), samples[0].dims())));
    }
    if mode == 0 || mode > basis.order() {
        return Err(Error::ModeOutOfRange { mode, order: basis.order() });
    }
    if let Some(bad) = samples.iter().find(|s| s.dims() != mean.dims()) {
        return Err(Error::shape(format!("sample dims {:?} vs {:?}", bad.dims(), mean.dims())));
    }
    let transposes = basis.transposes();
    let extent = mean.dims()[mode - 1];
    let sum = chunked_sum(samples.len(), extent, |i| {
        let y = project_partners(&samples[i].sub(mean)?, &transposes, mode)?;
        Ok(matricize(&y, mode)?.gram_rows())
    })?;
    Ok(sum.scale(1.0 / samples.len() as f64))
}

/// `(1/M) sum ||(A_m - mean) x_1 U_1^T ... x_N U_N^T||_F^2`.
pub fn projected_scatter(samples: &[DenseTensor], mean: &DenseTensor, basis: &ProjectionBasis) -> Result<f64> {
    check_basis(samples, basis)?;
    let transposes = basis.transposes();
    let chunks: Vec<Result<f64>> = (0..samples.len().div_ceil(REDUCTION_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = 0.0;
            for s in &samples[c * REDUCTION_CHUNK..((c + 1) * REDUCTION_CHUNK).min(samples.len())] {
                let y = multi_mode_product(&s.sub(mean)?, &transposes)?;
                acc += y.data().iter().map(|v| v * v).sum::<f64>();
            }
            Ok(acc)
        })
        .collect();
    let mut total = 0.0;
    for c in chunks {
        total += c?;
    }
    Ok(total / samples.len() as f64)
}

fn converged(prev: f64, current: f64, tol: f64) -> bool {
    (current - prev).abs() <= tol * prev.abs()
}

/// Fits CMP with an even split of every output extent between the classes.
pub fn fit_cmp(data: &LabeledDataset, output_dims: &[usize], opts: &FitOptions) -> Result<CmpModel> {
    let splits = output_dims.iter().map(|&p| ModeSplit::even(p)).collect::<Result<Vec<_>>>()?;
    fit_cmp_with_splits(data, &splits, opts)
}

/// Fits CMP keeping `splits[n].largest` leading and `splits[n].smallest`
/// trailing eigenvectors in mode `n + 1`.
///
/// The label-0 class plays the role of the first class: only its `Phi_n` is
/// ever formed, since after whitening the second class has the same
/// eigenvectors with complementary eigenvalues.
pub fn fit_cmp_with_splits(data: &LabeledDataset, splits: &[ModeSplit], opts: &FitOptions) -> Result<CmpModel> {
    opts.validate()?;
    let dims = data.dims().ok_or_else(|| Error::invalid("empty training set"))?.to_vec();
    if splits.len() != dims.len() {
        return Err(Error::shape(format!("{} mode splits for a tensor of order {}", splits.len(), dims.len())));
    }
    for (k, (s, &extent)) in splits.iter().zip(&dims).enumerate() {
        if s.total() == 0 || s.total() > extent {
            return Err(Error::invalid(format!(
                "mode {} keeps {} eigenvectors, must be between 1 and {extent}",
                k + 1,
                s.total()
            )));
        }
    }

    let (whitening, normalized) = normalize(data, opts.epsilon)?;
    let first = normalized.class_samples(0);
    let second = normalized.class_samples(1);
    let class_means = [mean_tensor(&first)?, mean_tensor(&second)?];
    let phi_center = match opts.phi_mean {
        PhiMean::Class => class_means[0].clone(),
        PhiMean::Global => mean_tensor(&normalized.samples)?,
    };

    let mut basis = ProjectionBasis::identity(&dims);
    let input_scatter = projected_scatter(&first, &phi_center, &basis)?;
    let mut scatter = vec![input_scatter];
    let mut mode_updates = Vec::new();
    let mut eigenvalues = vec![Vec::new(); dims.len()];
    let mut iterations = 0;
    let mut done = false;
    while iterations < opts.max_iter && !done {
        iterations += 1;
        for n in 1..=dims.len() {
            let phi = class_phi(&first, &phi_center, n, &basis)?;
            let eig = eig_symmetric(&phi)?;
            basis.matrices[n - 1] = eig.vectors;
            eigenvalues[n - 1] = eig.values;
            mode_updates.push(projected_scatter(&first, &phi_center, &basis)?);
        }
        let psi = *mode_updates.last().expect("at least one mode");
        done = converged(*scatter.last().expect("initial scatter"), psi, opts.tol);
        scatter.push(psi);
    }

    let selected = basis
        .matrices
        .iter()
        .zip(splits)
        .map(|(u, s)| {
            let extent = u.cols();
            let columns: Vec<usize> = (0..s.largest).chain((extent - s.smallest..extent).rev()).collect();
            u.select_columns(&columns)
        })
        .collect();
    let basis = ProjectionBasis::new(selected)?;
    let projected = projected_scatter(&first, &phi_center, &basis)?;
    Ok(CmpModel {
        whitening,
        basis,
        splits: splits.to_vec(),
        class_means,
        phi_eigenvalues: eigenvalues,
        class_names: data.class_names.clone(),
        phi_mean: opts.phi_mean,
        fit_report: FitReport {
            iterations,
            converged: done,
            scatter,
            mode_updates,
            input_scatter,
            projected_scatter: projected,
        },
    })
}

/// Fits MPCA, keeping the `output_dims[n]` leading eigenvectors of the pooled
/// `Phi_n` in each mode. Initial bases come from the raw mode scatters.
pub fn fit_mpca(samples: &[DenseTensor], output_dims: &[usize], opts: &FitOptions) -> Result<MpcaModel> {
    opts.validate()?;
    let mean = mean_tensor(samples)?;
    let dims = mean.dims().to_vec();
    if output_dims.len() != dims.len() {
        return Err(Error::shape(format!("{} output extents for a tensor of order {}", output_dims.len(), dims.len())));
    }
    if let Some((k, _)) = output_dims.iter().zip(&dims).enumerate().find(|(_, (&p, &i))| p == 0 || p > i) {
        return Err(Error::invalid(format!(
            "mode {} output extent {} must be between 1 and {}",
            k + 1,
            output_dims[k],
            dims[k]
        )));
    }
    let leading = |m: &Matrix, p: usize| -> Result<(Matrix, Vec<f64>)> {
        let eig = eig_symmetric(m)?;
        Ok((eig.vectors.select_columns(&(0..p).collect::<Vec<_>>()), eig.values))
    };

    let mut eigenvalues = Vec::with_capacity(dims.len());
    let mut initial = Vec::with_capacity(dims.len());
    for (n, &p) in output_dims.iter().enumerate() {
        let (u, values) = leading(&mode_scatter_matrix(samples, n + 1, &mean)?, p)?;
        initial.push(u);
        eigenvalues.push(values);
    }
    let mut basis = ProjectionBasis::new(initial)?;
    let input_scatter = average_total_scatter(samples)?;
    let mut scatter = vec![projected_scatter(samples, &mean, &basis)?];
    let mut mode_updates = Vec::new();
    let mut iterations = 0;
    let mut done = false;
    while iterations < opts.max_iter && !done {
        iterations += 1;
        for n in 1..=dims.len() {
            let phi = class_phi(samples, &mean, n, &basis)?;
            let (u, values) = leading(&phi, output_dims[n - 1])?;
            basis.matrices[n - 1] = u;
            eigenvalues[n - 1] = values;
            mode_updates.push(projected_scatter(samples, &mean, &basis)?);
        }
        let psi = *mode_updates.last().expect("at least one mode");
        done = converged(*scatter.last().expect("initial scatter"), psi, opts.tol);
        scatter.push(psi);
    }
    let projected = *scatter.last().expect("nonempty");
    Ok(MpcaModel {
        basis,
        global_mean: mean,
        phi_eigenvalues: eigenvalues,
        fit_report: FitReport { iterations, converged: done, scatter, mode_updates, input_scatter, projected_scatter: projected },
    })
}

/// A fitted dimensionality reducer.
#[derive(Clone, Debug, PartialEq)]
pub enum Reducer {
    /// Pass-through of tensors with the given extents.
    Identity(Vec<usize>),
    Mpca(MpcaModel),
    Cmp(CmpModel),
}

impl Reducer {
    pub fn project(&self, t: &DenseTensor) -> Result<DenseTensor> {
        match self {
            Reducer::Identity(dims) => {
                if t.dims() != dims.as_slice() {
                    return Err(Error::shape(format!("tensor dims {:?}, model expects {dims:?}", t.dims())));
                }
                Ok(t.clone())
            }
            Reducer::Mpca(m) => m.project(t),
            Reducer::Cmp(m) => m.project(t),
        }
    }

    pub fn input_dims(&self) -> Vec<usize> {
        match self {
            Reducer::Identity(dims) => dims.clone(),
            Reducer::Mpca(m) => m.basis.input_dims(),
            Reducer::Cmp(m) => m.basis.input_dims(),
        }
    }

    pub fn output_dims(&self) -> Vec<usize> {
        match self {
            Reducer::Identity(dims) => dims.clone(),
            Reducer::Mpca(m) => m.basis.output_dims(),
            Reducer::Cmp(m) => m.basis.output_dims(),
        }
    }

    pub fn fit_report(&self) -> Option<&FitReport> {
        match self {
            Reducer::Identity(_) => None,
            Reducer::Mpca(m) => Some(&m.fit_report),
            Reducer::Cmp(m) => Some(&m.fit_report),
        }
    }

    pub fn transform(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        data.map_samples(|s| self.project(s))
    }
}
