//! Sample archives: a directory holding `dataset.json`, an `index.csv` with
//! header `id,label,class_id,x,y`, and one TDF file per sample under
//! `samples/`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{load_tensor_file, save_tensor_file, LabeledDataset};
use crate::error::{Error, Result};

pub const ARCHIVE_FORMAT: &str = "cmp-archive/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMeta {
    pub format: String,
    pub class_names: [String; 2],
    pub dims: Vec<usize>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRow {
    pub id: String,
    pub label: u8,
    pub class_id: u32,
    pub x: Option<usize>,
    pub y: Option<usize>,
}

fn sample_path(dir: &Path, id: &str) -> std::path::PathBuf {
    dir.join("samples").join(format!("{id}.tdf"))
}

/// Writes `data` under `dir`, creating it if needed.
pub fn write_archive(dir: impl AsRef<Path>, data: &LabeledDataset, positions: Option<&[(usize, usize)]>) -> Result<()> {
    let dir = dir.as_ref();
    if data.is_empty() {
        return Err(Error::invalid("refusing to write an empty archive"));
    }
    if let Some(p) = positions {
        if p.len() != data.len() {
            return Err(Error::shape(format!("{} positions for {} samples", p.len(), data.len())));
        }
    }
    if let Some(bad) = data.ids.iter().find(|id| id.is_empty() || id.contains(['/', '\\', ','])) {
        return Err(Error::invalid(format!("sample id {bad:?} cannot name a file")));
    }
    fs::create_dir_all(dir.join("samples"))?;
    let meta = ArchiveMeta {
        format: ARCHIVE_FORMAT.to_string(),
        class_names: data.class_names.clone(),
        dims: data.dims().expect("nonempty").to_vec(),
        count: data.len(),
    };
    fs::write(dir.join("dataset.json"), serde_json::to_vec_pretty(&meta)?)?;
    let mut index = csv::Writer::from_path(dir.join("index.csv"))?;
    for i in 0..data.len() {
        let (x, y) = positions.map_or((None, None), |p| (Some(p[i].0), Some(p[i].1)));
        index.serialize(IndexRow {
            id: data.ids[i].clone(),
            label: data.labels[i],
            class_id: data.source_classes[i],
            x,
            y,
        })?;
        save_tensor_file(sample_path(dir, &data.ids[i]), &data.samples[i])?;
    }
    index.flush()?;
    Ok(())
}

/// Reads `dataset.json` and `index.csv` without touching the samples.
pub fn read_archive_index(dir: impl AsRef<Path>) -> Result<(ArchiveMeta, Vec<IndexRow>)> {
    let dir = dir.as_ref();
    let meta: ArchiveMeta = serde_json::from_slice(&fs::read(dir.join("dataset.json"))?)?;
    if meta.format != ARCHIVE_FORMAT {
        return Err(Error::Format(format!("unknown archive format {:?}", meta.format)));
    }
    let rows = csv::Reader::from_path(dir.join("index.csv"))?
        .deserialize()
        .collect::<std::result::Result<Vec<IndexRow>, _>>()?;
    if rows.len() != meta.count {
        return Err(Error::Format(format!("index lists {} samples, metadata says {}", rows.len(), meta.count)));
    }
    Ok((meta, rows))
}

fn load_rows(dir: &Path, meta: &ArchiveMeta, rows: &[IndexRow]) -> Result<LabeledDataset> {
    let samples = rows
        .iter()
        .map(|r| {
            let t = load_tensor_file(sample_path(dir, &r.id))?;
            if t.dims() != meta.dims.as_slice() {
                return Err(Error::shape(format!("sample {} has dims {:?}, archive says {:?}", r.id, t.dims(), meta.dims)));
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(
        samples,
        rows.iter().map(|r| r.label).collect(),
        rows.iter().map(|r| r.id.clone()).collect(),
        meta.class_names.clone(),
        rows.iter().map(|r| r.class_id).collect(),
    )
}

/// Loads every sample of an archive, in index order.
pub fn load_archive(dir: impl AsRef<Path>) -> Result<(LabeledDataset, Vec<IndexRow>)> {
    let dir = dir.as_ref();
    let (meta, rows) = read_archive_index(dir)?;
    let data = load_rows(dir, &meta, &rows)?;
    Ok((data, rows))
}

/// Loads the samples named by `ids`, in that order.
pub fn load_archive_subset(dir: impl AsRef<Path>, ids: &[String]) -> Result<(LabeledDataset, Vec<IndexRow>)> {
    let dir = dir.as_ref();
    let (meta, rows) = read_archive_index(dir)?;
    let by_id: HashMap<&str, &IndexRow> = rows.iter().map(|r| (r.id.as_str(), r)).collect();
    let picked = ids
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .map(|r| (*r).clone())
                .ok_or_else(|| Error::invalid(format!("sample {id} not found in archive {}", dir.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let data = load_rows(dir, &meta, &picked)?;
    Ok((data, picked))
}
