//! Dataset ingestion: labeled tensor sets, the TDF tensor file format,
//! hyperspectral cubes and patch extraction, seeded splits, and on-disk
//! sample archives.

mod archive;
mod cube;
mod split;
mod tdf;

pub use archive::{
    load_archive, load_archive_subset, read_archive_index, write_archive, ArchiveMeta, IndexRow, ARCHIVE_FORMAT,
};
pub use cube::{
    extract_patches, load_manifest, CubeDataset, DatasetManifest, PatchExtraction, PAVIA_MAN_MADE_IDS,
};
pub use split::{split_by_groups, split_train_test, Split, SplitGroupCounts, DEFAULT_PER_CLASS};
pub use tdf::{decode_tdf, encode_tdf, load_tensor_file, save_tensor_file, TDF_MAGIC};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Equal-shape tensor samples with binary labels `{0, 1}`.
///
/// `class_names[0]` names label 0, the class listed first. `source_classes`
/// keeps the original (pre-grouping) class id of each sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub samples: Vec<DenseTensor>,
    pub labels: Vec<u8>,
    pub ids: Vec<String>,
    pub class_names: [String; 2],
    pub source_classes: Vec<u32>,
}

impl LabeledDataset {
    pub fn new(
        samples: Vec<DenseTensor>,
        labels: Vec<u8>,
        ids: Vec<String>,
        class_names: [String; 2],
        source_classes: Vec<u32>,
    ) -> Result<Self> {
        let n = samples.len();
        if labels.len() != n || ids.len() != n || source_classes.len() != n {
            return Err(Error::shape(format!(
                "{n} samples but {} labels, {} ids, {} source classes",
                labels.len(),
                ids.len(),
                source_classes.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::invalid(format!("labels must be 0 or 1, found {l}")));
        }
        if let Some(first) = samples.first() {
            if let Some(bad) = samples.iter().find(|s| s.dims() != first.dims()) {
                return Err(Error::shape(format!("sample dims {:?} vs {:?}", bad.dims(), first.dims())));
            }
        }
        Ok(LabeledDataset { samples, labels, ids, class_names, source_classes })
    }

    /// Builds a dataset whose source classes are the binary labels and ids
    /// are zero-padded positions.
    pub fn from_labeled(samples: Vec<DenseTensor>, labels: Vec<u8>, class_names: [String; 2]) -> Result<Self> {
        let width = samples.len().max(1).to_string().len();
        let ids = (0..samples.len()).map(|i| format!("s{i:0width$}")).collect();
        let source = labels.iter().map(|&l| u32::from(l)).collect();
        LabeledDataset::new(samples, labels, ids, class_names, source)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dims(&self) -> Option<&[usize]> {
        self.samples.first().map(DenseTensor::dims)
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Samples of one label, in dataset order.
    pub fn class_samples(&self, label: u8) -> Vec<DenseTensor> {
        self.samples.iter().zip(&self.labels).filter(|(_, &l)| l == label).map(|(s, _)| s.clone()).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            class_names: self.class_names.clone(),
            source_classes: indices.iter().map(|&i| self.source_classes[i]).collect(),
        }
    }

    /// Replaces every sample by `f(sample)`, keeping labels and ids.
    pub fn map_samples<F>(&self, f: F) -> Result<LabeledDataset>
    where
        F: Fn(&DenseTensor) -> Result<DenseTensor> + Sync + Send,
    {
        use rayon::prelude::*;
        let samples = self.samples.par_iter().map(&f).collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(
            samples,
            self.labels.clone(),
            self.ids.clone(),
            self.class_names.clone(),
            self.source_classes.clone(),
        )
    }

    /// Errors unless both classes have at least `min` samples.
    pub fn require_both_classes(&self, min: usize) -> Result<()> {
        let counts = self.class_counts();
        for (label, &c) in counts.iter().enumerate() {
            if c < min {
                return Err(Error::invalid(format!(
                    "class {label} ({}) has {c} samples, at least {min} required",
                    self.class_names[label]
                )));
            }
        }
        Ok(())
    }
}
