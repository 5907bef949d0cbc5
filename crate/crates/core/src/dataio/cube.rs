use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_tensor_file, LabeledDataset};
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Pavia University ground-truth ids of the man-made classes: asphalt (1),
/// painted metal sheets (5), bitumen (7) and self-blocking bricks (8).
pub const PAVIA_MAN_MADE_IDS: [u32; 4] = [1, 5, 7, 8];

/// JSON manifest describing a hyperspectral scene on disk. Paths are
/// resolved relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub cube: PathBuf,
    pub ground_truth: PathBuf,
    pub class_names: BTreeMap<u32, String>,
    #[serde(default)]
    pub positive_ids: Vec<u32>,
    /// Names of the binary classes (label 0, label 1).
    #[serde(default = "default_binary_names")]
    pub binary_class_names: [String; 2],
}

fn default_binary_names() -> [String; 2] {
    ["negative".to_string(), "positive".to_string()]
}

/// A hyperspectral image `H x W x C` with its ground-truth id grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeDataset {
    pub cube: DenseTensor,
    /// Row-major `H x W` class ids, 0 meaning unlabeled.
    pub ground_truth: Vec<u32>,
    pub class_id_names: BTreeMap<u32, String>,
}

impl CubeDataset {
    pub fn new(cube: DenseTensor, ground_truth: &DenseTensor, class_id_names: BTreeMap<u32, String>) -> Result<Self> {
        if cube.order() != 3 {
            return Err(Error::shape(format!("cube must be H x W x C, got {:?}", cube.dims())));
        }
        let (h, w) = (cube.dims()[0], cube.dims()[1]);
        let gt_ok = match ground_truth.dims() {
            [gh, gw] => (*gh, *gw) == (h, w),
            [gh, gw, 1] => (*gh, *gw) == (h, w),
            _ => false,
        };
        if !gt_ok {
            return Err(Error::shape(format!(
                "ground truth {:?} does not match cube spatial dims {h}x{w}",
                ground_truth.dims()
            )));
        }
        let ids = ground_truth
            .data()
            .iter()
            .map(|&v| {
                if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                    Err(Error::Format(format!("ground-truth value {v} is not a nonnegative integer id")))
                } else {
                    Ok(v as u32)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CubeDataset { cube, ground_truth: ids, class_id_names })
    }

    pub fn height(&self) -> usize {
        self.cube.dims()[0]
    }

    pub fn width(&self) -> usize {
        self.cube.dims()[1]
    }

    pub fn bands(&self) -> usize {
        self.cube.dims()[2]
    }

    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        self.ground_truth[y * self.width() + x]
    }
}

/// Reads a manifest and the cube and ground truth it points to.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<(DatasetManifest, CubeDataset)> {
    let path = path.as_ref();
    let manifest: DatasetManifest = serde_json::from_slice(&fs::read(path)?)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let cube = load_tensor_file(base.join(&manifest.cube))?;
    let gt = load_tensor_file(base.join(&manifest.ground_truth))?;
    let data = CubeDataset::new(cube, &gt, manifest.class_names.clone())?;
    Ok((manifest, data))
}

/// Patches cut from a cube, with their center pixels.
#[derive(Clone, Debug)]
pub struct PatchExtraction {
    pub dataset: LabeledDataset,
    /// `(x, y)` center of each patch, `x` the column.
    pub positions: Vec<(usize, usize)>,
    /// Requested positive ids that never occur in the ground truth.
    pub missing_positive_ids: Vec<u32>,
}

/// Cuts an `s x s x C` patch around every labeled pixel whose patch fits
/// inside the image. The patch label is 1 when the center's ground-truth id
/// is in `positive_ids`. Emission is row-major over centers; ids are `x_y`.
pub fn extract_patches(
    data: &CubeDataset,
    s: usize,
    positive_ids: &BTreeSet<u32>,
    class_names: [String; 2],
) -> Result<PatchExtraction> {
    if s.is_multiple_of(2) {
        return Err(Error::invalid(format!("patch size must be odd, got {s}")));
    }
    let (h, w, c) = (data.height(), data.width(), data.bands());
    if s > h.min(w) {
        return Err(Error::invalid(format!("patch size {s} exceeds image extent {h}x{w}")));
    }
    if positive_ids.is_empty() {
        return Err(Error::invalid("positive class id set is empty"));
    }
    let present: BTreeSet<u32> = data.ground_truth.iter().copied().filter(|&id| id != 0).collect();
    let missing_positive_ids = positive_ids.difference(&present).copied().collect();

    let r = s / 2;
    let cube = data.cube.data();
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    let mut source = Vec::new();
    let mut positions = Vec::new();
    for y in r..h - r {
        for x in r..w - r {
            let id = data.label_at(x, y);
            if id == 0 {
                continue;
            }
            let mut patch = Vec::with_capacity(s * s * c);
            for yy in y - r..=y + r {
                let start = (yy * w + (x - r)) * c;
                patch.extend_from_slice(&cube[start..start + s * c]);
            }
            samples.push(DenseTensor::new(vec![s, s, c], patch)?);
            labels.push(u8::from(positive_ids.contains(&id)));
            ids.push(format!("{x}_{y}"));
            source.push(id);
            positions.push((x, y));
        }
    }
    let dataset = LabeledDataset::new(samples, labels, ids, class_names, source)?;
    Ok(PatchExtraction { dataset, positions, missing_positive_ids })
}
