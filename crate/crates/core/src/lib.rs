//! Tensor subspace learning for binary classification.
//!
//! The crate implements Common Mode Patterns (CMP), a supervised reduction
//! that generalizes common spatial patterns to tensors of any order, next to
//! the unsupervised MPCA baseline, and the pieces needed to score them on
//! hyperspectral patches: patch extraction, seeded splits, a rank-1 tensor
//! logistic classifier, and binary file formats for tensors and models.
//!
//! Modes are 1-based throughout the public API.

pub mod classify;
pub mod dataio;
pub mod eigen;
pub mod error;
pub mod model_io;
pub mod subspace;
pub mod synth;
pub mod tensor;

pub use classify::{evaluate, train_nearest_centroid, train_rank1, Classifier, EvalReport, NearestCentroid, Rank1Classifier, TrainOptions};
pub use dataio::LabeledDataset;
pub use eigen::{build_whitening, eig_symmetric, EigenSystem, WhiteningTransform};
pub use error::{Error, Result};
pub use model_io::{load_model, save_model, SavedModel};
pub use subspace::{fit_cmp, fit_cmp_with_splits, fit_mpca, project, CmpModel, FitOptions, ModeSplit, MpcaModel, ProjectionBasis, Reducer};
pub use tensor::{DenseTensor, Matrix};
