use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use cmp_core::classify::{evaluate, train_nearest_centroid, train_rank1, Classifier, TrainOptions};
use cmp_core::dataio::{
    extract_patches, load_archive_subset, load_manifest, read_archive_index, save_tensor_file, split_by_groups,
    write_archive, DatasetManifest, LabeledDataset, DEFAULT_PER_CLASS, PAVIA_MAN_MADE_IDS,
};
use cmp_core::model_io::{load_model, save_model, SavedModel};
use cmp_core::subspace::{fit_cmp_with_splits, fit_mpca, FitOptions, ModeSplit, PhiMean, Reducer};
use cmp_core::synth;
use cmp_core::tensor::DenseTensor;

use crate::config::{
    config_error, echo, load_settings, pick, require, ClassifierKind, PhiMeanArg, Preset, ReducerKind, SplitBasis,
    Subset, SynthKind,
};
use crate::{EvalArgs, FitArgs, PatchesArgs, SplitArgs, SynthArgs, TrainArgs, TransformArgs};

const DEFAULT_PATCH_SIZE: usize = 7;
const DEFAULT_SPATIAL: usize = 5;
const DEFAULT_K: usize = 13;
/// Samples loaded from an archive at a time when projecting.
const LOAD_BATCH: usize = 2048;

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(ext);
    PathBuf::from(p)
}

// ---------------------------------------------------------------- synth

#[derive(Serialize)]
struct SynthSettings {
    kind: SynthKind,
    seed: u64,
    out: PathBuf,
}

/// Defaults of `T` with the keys of `overrides` replaced.
fn synth_params<T: Default + Serialize + DeserializeOwned>(overrides: Option<&Value>) -> Result<T> {
    let mut value = serde_json::to_value(T::default())?;
    if let Some(o) = overrides {
        let Value::Object(o) = o else {
            return Err(config_error("synth_params must be an object"));
        };
        let map = value.as_object_mut().expect("parameter structs serialize to objects");
        for (k, v) in o {
            if !map.contains_key(k) {
                return Err(config_error(format!("unknown synth parameter {k:?}")));
            }
            map.insert(k.clone(), v.clone());
        }
    }
    serde_json::from_value(value).map_err(|e| config_error(format!("synth_params: {e}")))
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let file = load_settings(args.config.as_deref(), "synth")?;
    let settings = SynthSettings {
        kind: require(args.kind, file.kind, "kind")?,
        seed: pick(args.seed, file.seed, 0),
        out: require(args.out, file.out, "out")?,
    };
    let overrides = file.synth_params.as_ref();
    let (seed, out) = (settings.seed, &settings.out);
    let (params, extra) = match settings.kind {
        SynthKind::CspVectors => {
            let p: synth::CspVectorsParams = synth_params(overrides)?;
            write_archive(out, &synth::csp_vectors(&p, seed)?, None)?;
            (serde_json::to_value(&p)?, Value::Null)
        }
        SynthKind::LowVarianceDiscriminant => {
            let p: synth::LowVarianceParams = synth_params(overrides)?;
            write_archive(out, &synth::low_variance_discriminant(&p, seed)?, None)?;
            (serde_json::to_value(&p)?, json!({ "discriminative_fraction": p.discriminative_fraction() }))
        }
        SynthKind::Rank1Planted => {
            let p: synth::Rank1PlantedParams = synth_params(overrides)?;
            let (data, factors) = synth::rank1_planted(&p, seed)?;
            write_archive(out, &data, None)?;
            (serde_json::to_value(&p)?, json!({ "planted_factors": factors }))
        }
        SynthKind::GaussianBlobs => {
            let p: synth::BlobsParams = synth_params(overrides)?;
            write_archive(out, &synth::gaussian_blobs(&p, seed)?, None)?;
            (serde_json::to_value(&p)?, Value::Null)
        }
        SynthKind::HyperspectralCube => {
            let p: synth::CubeParams = synth_params(overrides)?;
            let scene = synth::hyperspectral_cube(&p, seed)?;
            fs::create_dir_all(out)?;
            let gt = DenseTensor::new(
                vec![scene.height(), scene.width()],
                scene.ground_truth.iter().map(|&id| f64::from(id)).collect(),
            )?;
            save_tensor_file(out.join("cube.tdf"), &scene.cube)?;
            save_tensor_file(out.join("gt.tdf"), &gt)?;
            let manifest = DatasetManifest {
                cube: "cube.tdf".into(),
                ground_truth: "gt.tdf".into(),
                class_names: scene.class_id_names.clone(),
                positive_ids: p.positive_ids.clone(),
                binary_class_names: ["negative".into(), "positive".into()],
            };
            write_json(&out.join("manifest.json"), &manifest)?;
            (serde_json::to_value(&p)?, Value::Null)
        }
    };
    let mut report = json!({ "config": echo("synth", &settings), "params": params });
    if let Value::Object(extra) = extra {
        report.as_object_mut().expect("object").extend(extra);
    }
    write_json(&out.join("generator.json"), &report)
}

// -------------------------------------------------------------- patches

#[derive(Serialize)]
struct PatchesSettings {
    manifest: PathBuf,
    patch_size: usize,
    preset: Option<Preset>,
    positive_ids: Vec<u32>,
    out: PathBuf,
}

pub fn patches(args: PatchesArgs) -> Result<()> {
    let file = load_settings(args.config.as_deref(), "patches")?;
    let manifest_path = require(args.manifest, file.manifest, "manifest")?;
    let patch_size = pick(args.patch_size, file.patch_size, DEFAULT_PATCH_SIZE);
    if patch_size % 2 == 0 {
        return Err(config_error(format!("patch size must be odd, got {patch_size}")));
    }
    let out = require(args.out, file.out, "out")?;
    // A flag on either source beats the file's other source.
    let (preset, ids) = match (args.preset, args.positive_ids) {
        (None, None) => (file.preset, file.positive_ids),
        flags => flags,
    };
    if preset.is_some() && ids.is_some() {
        return Err(config_error("give either a preset or positive ids, not both"));
    }
    let (manifest, cube) =
        load_manifest(&manifest_path).with_context(|| format!("loading manifest {}", manifest_path.display()))?;
    let positive_ids = match (preset, ids) {
        (Some(Preset::PaviaManMade), _) => PAVIA_MAN_MADE_IDS.to_vec(),
        (None, Some(ids)) => ids,
        (None, None) => manifest.positive_ids.clone(),
    };
    if positive_ids.is_empty() {
        return Err(config_error("no positive class ids: pass --preset or --positive-ids, or list them in the manifest"));
    }
    let settings = PatchesSettings { manifest: manifest_path, patch_size, preset, positive_ids, out };
    let positive: BTreeSet<u32> = settings.positive_ids.iter().copied().collect();
    let extraction = extract_patches(&cube, patch_size, &positive, manifest.binary_class_names.clone())?;
    if !extraction.missing_positive_ids.is_empty() {
        eprintln!("warning: positive ids {:?} do not occur in the ground truth", extraction.missing_positive_ids);
    }
    let data = &extraction.dataset;
    if data.is_empty() {
        bail!(cmp_core::Error::InvalidArgument("no labeled pixel has a complete patch".into()));
    }
    write_archive(&settings.out, data, Some(&extraction.positions))?;
    let mut per_class_id: BTreeMap<u32, usize> = BTreeMap::new();
    for &id in &data.source_classes {
        *per_class_id.entry(id).or_default() += 1;
    }
    let report = json!({
        "config": echo("patches", &settings),
        "count": data.len(),
        "dims": data.dims(),
        "label_counts": data.class_counts(),
        "class_names": data.class_names,
        "class_id_counts": per_class_id,
        "missing_positive_ids": extraction.missing_positive_ids,
    });
    write_json(&settings.out.join("patches.json"), &report)
}

// ---------------------------------------------------------------- split

#[derive(Serialize, Deserialize)]
struct SplitRow {
    id: String,
    label: u8,
}

#[derive(Serialize)]
struct SplitSettings {
    archive: PathBuf,
    per_class: usize,
    per_class_basis: SplitBasis,
    seed: u64,
    out: PathBuf,
}

fn write_split_csv(path: &Path, rows: impl Iterator<Item = SplitRow>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_split_ids(split_dir: &Path, part: &str) -> Result<Vec<String>> {
    let path = split_dir.join(format!("{part}.csv"));
    let mut r = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
    let rows = r.deserialize::<SplitRow>().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(rows.into_iter().map(|r| r.id).collect())
}

pub fn split(args: SplitArgs) -> Result<()> {
    let file = load_settings(args.config.as_deref(), "split")?;
    let settings = SplitSettings {
        archive: require(args.archive, file.archive, "archive")?,
        per_class: pick(args.per_class, file.per_class, DEFAULT_PER_CLASS),
        per_class_basis: pick(args.per_class_basis, file.per_class_basis, SplitBasis::Original),
        seed: pick(args.seed, file.seed, 0),
        out: require(args.out, file.out, "out")?,
    };
    if settings.per_class == 0 {
        return Err(config_error("per_class must be positive"));
    }
    let (_, rows) = read_archive_index(&settings.archive)
        .with_context(|| format!("reading archive {}", settings.archive.display()))?;
    let groups: Vec<u32> = match settings.per_class_basis {
        SplitBasis::Original => rows.iter().map(|r| r.class_id).collect(),
        SplitBasis::Binary => rows.iter().map(|r| u32::from(r.label)).collect(),
    };
    let split = split_by_groups(&groups, settings.per_class, settings.seed)?;
    fs::create_dir_all(&settings.out)?;
    let to_rows = |idx: &[usize]| -> Vec<SplitRow> {
        idx.iter().map(|&i| SplitRow { id: rows[i].id.clone(), label: rows[i].label }).collect()
    };
    write_split_csv(&settings.out.join("train.csv"), to_rows(&split.train).into_iter())?;
    write_split_csv(&settings.out.join("test.csv"), to_rows(&split.test).into_iter())?;
    let empty = split.groups_without_test();
    if !empty.is_empty() {
        eprintln!("warning: groups {empty:?} have no test samples left");
    }
    let count_labels = |idx: &[usize]| {
        let mut c = [0usize; 2];
        for &i in idx {
            c[rows[i].label as usize] += 1;
        }
        c
    };
    let report = json!({
        "config": echo("split", &settings),
        "train_size": split.train.len(),
        "test_size": split.test.len(),
        "train_label_counts": count_labels(&split.train),
        "test_label_counts": count_labels(&split.test),
        "groups": split.groups,
        "groups_without_test": empty,
    });
    write_json(&settings.out.join("split.json"), &report)
}

// ------------------------------------------------------------------ fit

#[derive(Serialize)]
struct FitSettings {
    archive: PathBuf,
    split: PathBuf,
    reducer: ReducerKind,
    k: usize,
    spatial: usize,
    dims: Option<Vec<usize>>,
    phi_mean: PhiMeanArg,
    tol: f64,
    max_iter: usize,
    epsilon: f64,
    out: PathBuf,
    report: PathBuf,
}

/// Output extents: explicit `dims`, else `spatial x spatial x spectral` for
/// three-way samples.
fn output_dims(s: &FitSettings, input: &[usize]) -> Result<Vec<usize>> {
    if let Some(d) = &s.dims {
        if d.len() != input.len() {
            return Err(config_error(format!("--dims has {} entries, samples have {} modes", d.len(), input.len())));
        }
        return Ok(d.clone());
    }
    if input.len() != 3 {
        return Err(config_error(format!("samples have dims {input:?}; pass --dims for non-three-way data")));
    }
    let spectral = match s.reducer {
        ReducerKind::Cmp => 2 * s.k,
        _ => s.k,
    };
    Ok(vec![s.spatial, s.spatial, spectral])
}

/// Leading and trailing counts for each output extent; odd extents give the
/// extra component to the leading block.
fn cmp_splits(dims: &[usize]) -> Vec<ModeSplit> {
    dims.iter().map(|&p| ModeSplit { largest: p.div_ceil(2), smallest: p / 2 }).collect()
}

fn load_part(archive: &Path, split_dir: &Path, part: &str) -> Result<LabeledDataset> {
    let ids = read_split_ids(split_dir, part)?;
    if ids.is_empty() {
        bail!(cmp_core::Error::InvalidArgument(format!("the {part} split is empty")));
    }
    let (data, _) = load_archive_subset(archive, &ids)?;
    Ok(data)
}

pub fn fit(args: FitArgs) -> Result<()> {
    let file = load_settings(args.config.as_deref(), "fit")?;
    let out = require(args.out, file.out, "out")?;
    let settings = FitSettings {
        archive: require(args.archive, file.archive, "archive")?,
        split: require(args.split, file.split, "split")?,
        reducer: pick(args.reducer, file.reducer, ReducerKind::Cmp),
        k: pick(args.k, file.k, DEFAULT_K),
        spatial: pick(args.spatial, file.spatial, DEFAULT_SPATIAL),
        dims: args.dims.or(file.dims),
        phi_mean: pick(args.phi_mean, file.phi_mean, PhiMeanArg::Class),
        tol: pick(args.tol, file.tol, FitOptions::default().tol),
        max_iter: pick(args.max_iter, file.max_iter, FitOptions::default().max_iter),
        epsilon: pick(args.epsilon, file.epsilon, FitOptions::default().epsilon),
        report: args.report.or(file.report).unwrap_or_else(|| with_extension(&out, ".json")),
        out,
    };
    if settings.k == 0 || settings.spatial == 0 || settings.max_iter == 0 {
        return Err(config_error("k, spatial and max_iter must be positive"));
    }
    let opts = FitOptions {
        tol: settings.tol,
        max_iter: settings.max_iter,
        epsilon: settings.epsilon,
        phi_mean: match settings.phi_mean {
            PhiMeanArg::Class => PhiMean::Class,
            PhiMeanArg::Global => PhiMean::Global,
        },
    };
    let train = load_part(&settings.archive, &settings.split, "train")?;
    let input = train.dims().expect("nonempty").to_vec();
    let mut details = serde_json::Map::new();
    let reducer = match settings.reducer {
        ReducerKind::None => Reducer::Identity(input.clone()),
        ReducerKind::Cmp => {
            let splits = cmp_splits(&output_dims(&settings, &input)?);
            let model = fit_cmp_with_splits(&train, &splits, &opts)?;
            details.insert("splits".into(), serde_json::to_value(&model.splits)?);
            details.insert("phi_eigenvalues".into(), serde_json::to_value(&model.phi_eigenvalues)?);
            details.insert(
                "whitening_clipped".into(),
                json!(model.whitening.modes.iter().map(|m| m.clipped).collect::<Vec<_>>()),
            );
            details.insert("class_names".into(), json!(model.class_names));
            Reducer::Cmp(model)
        }
        ReducerKind::Mpca => {
            let model = fit_mpca(&train.samples, &output_dims(&settings, &input)?, &opts)?;
            details.insert("phi_eigenvalues".into(), serde_json::to_value(&model.phi_eigenvalues)?);
            Reducer::Mpca(model)
        }
    };
    if let Some(parent) = settings.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    save_model(&settings.out, &SavedModel::Reducer(reducer.clone()))?;
    let mut report = json!({
        "config": echo("fit", &settings),
        "train_size": train.len(),
        "train_label_counts": train.class_counts(),
        "input_dims": input,
        "output_dims": reducer.output_dims(),
        "fit_report": reducer.fit_report(),
    });
    report.as_object_mut().expect("object").extend(details);
    write_json(&settings.report, &report)
}

// ------------------------------------------------------------ transform

fn load_reducer(path: &Path) -> Result<Reducer> {
    match load_model(path).with_context(|| format!("loading reducer {}", path.display()))? {
        SavedModel::Reducer(r) => Ok(r),
        other => bail!(cmp_core::Error::InvalidArgument(format!(
            "{} holds a {} model, not a reducer",
            path.display(),
            other.kind_name()
        ))),
    }
}

/// Loads the named samples batch by batch, projecting each batch through
/// `reducer` when given.
fn load_projected(archive: &Path, ids: &[String], reducer: Option<&Reducer>) -> Result<(LabeledDataset, Vec<cmp_core::dataio::IndexRow>)> {
    let mut samples = Vec::with_capacity(ids.len());
    let mut labels = Vec::with_capacity(ids.len());
    let mut sources = Vec::with_capacity(ids.len());
    let mut all_rows = Vec::with_capacity(ids.len());
    let mut names = None;
    for chunk in ids.chunks(LOAD_BATCH) {
        let (data, rows) = load_archive_subset(archive, chunk)?;
        let data = match reducer {
            Some(r) => r.transform(&data)?,
            None => data,
        };
        names.get_or_insert(data.class_names.clone());
        samples.extend(data.samples);
        labels.extend(data.labels);
        sources.extend(data.source_classes);
        all_rows.extend(rows);
    }
    let names = names.ok_or_else(|| cmp_core::Error::InvalidArgument("no samples selected".into()))?;
    let data = LabeledDataset::new(samples, labels, ids.to_vec(), names, sources)?;
    Ok((data, all_rows))
}

#[derive(Serialize)]
struct TransformSettings {
    archive: PathBuf,
    model: PathBuf,
    split: Option<PathBuf>,
    subset: Subset,
    out: PathBuf,
}

pub fn transform(args: TransformArgs) -> Result<()> {
    let file = load_settings(args.config.as_deref(), "transform")?;
    let settings = TransformSettings {
        archive: require(args.archive, file.archive, "archive")?,
        model: require(args.model, file.model, "model")?,
        split: args.split.or(file.split),
        subset: pick(args.subset, file.subset, Subset::All),
        out: require(args.out, file.out, "out")?,
    };
    let ids = match (settings.subset, &settings.split) {
        (Subset::All, _) => read_archive_index(&settings.archive)?.1.into_iter().map(|r| r.id).collect(),
        (Subset::Train, Some(s)) => read_split_ids(s, "train")?,
        (Subset::Test, Some(s)) => read_split_ids(s, "test")?,
        (_, None) => return Err(config_error("a train or test subset needs --split")),
    };
    let reducer = load_reducer(&settings.model)?;
    let (data, rows) = load_projected(&settings.archive, &ids, Some(&reducer))?;
    let positions: Option<Vec<(usize, usize)>> = rows.iter().map(|r| r.x.zip(r.y)).collect();
    write_archive(&settings.out, &data, positions.as_deref())?;
    let report = json!({
        "config": echo("transform", &settings),
        "count": data.len(),
        "input_dims": reducer.input_dims(),
        "output_dims": reducer.output_dims(),
    });
    write_json(&settings.out.join("transform.json"), &report)
}

// ---------------------------------------------------------------- train

#[derive(Serialize)]
struct TrainSettings {
    archive: PathBuf,
    split: PathBuf,
    reducer_model: Option<PathBuf>,
    classifier: ClassifierKind,
    lr: f64,
    lambda: f64,
    inner_steps: usize,
    epochs: usize,
    out: PathBuf,
    report: PathBuf,
}

pub fn train(args: TrainArgs) -> Result<()> {
    let file = load_settings(args.config.as_deref(), "train")?;
    let defaults = TrainOptions::default();
    let out = require(args.out, file.out, "out")?;
    let settings = TrainSettings {
        archive: require(args.archive, file.archive, "archive")?,
        split: require(args.split, file.split, "split")?,
        reducer_model: args.reducer_model.or(file.reducer_model),
        classifier: pick(args.classifier, file.classifier, ClassifierKind::Rank1),
        lr: pick(args.lr, file.lr, defaults.lr),
        lambda: pick(args.lambda, file.lambda, defaults.lambda),
        inner_steps: pick(args.inner_steps, file.inner_steps, defaults.inner_steps),
        epochs: pick(args.epochs, file.epochs, defaults.epochs),
        report: args.report.or(file.report).unwrap_or_else(|| with_extension(&out, ".json")),
        out,
    };
    if !(settings.lr > 0.0 && settings.lr.is_finite()) || !(settings.lambda >= 0.0 && settings.lambda.is_finite()) {
        return Err(config_error("lr must be positive and lambda nonnegative"));
    }
    let reducer = settings.reducer_model.as_deref().map(load_reducer).transpose()?;
    let ids = read_split_ids(&settings.split, "train")?;
    let (train, _) = load_projected(&settings.archive, &ids, reducer.as_ref())?;
    let opts = TrainOptions {
        lr: settings.lr,
        lambda: settings.lambda,
        inner_steps: settings.inner_steps,
        epochs: settings.epochs,
    };
    let (model, loss) = match settings.classifier {
        ClassifierKind::Rank1 => {
            let m = train_rank1(&train, &opts)?;
            let loss = m.training_report.loss.clone();
            (SavedModel::Rank1(m), Some(loss))
        }
        ClassifierKind::Centroid => (SavedModel::Centroid(train_nearest_centroid(&train)?), None),
    };
    let accuracy = match &model {
        SavedModel::Rank1(m) => evaluate(m, &train)?.overall_accuracy,
        SavedModel::Centroid(m) => evaluate(m, &train)?.overall_accuracy,
        SavedModel::Reducer(_) => unreachable!("classifiers only"),
    };
    if let Some(parent) = settings.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    save_model(&settings.out, &model)?;
    let report = json!({
        "config": echo("train", &settings),
        "train_size": train.len(),
        "input_dims": train.dims(),
        "training_loss": loss,
        "train_accuracy": accuracy,
    });
    write_json(&settings.report, &report)
}

// ----------------------------------------------------------------- eval

#[derive(Serialize)]
struct EvalSettings {
    archive: PathBuf,
    split: PathBuf,
    reducer_model: Option<PathBuf>,
    model: PathBuf,
    out: PathBuf,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let file = load_settings(args.config.as_deref(), "eval")?;
    let settings = EvalSettings {
        archive: require(args.archive, file.archive, "archive")?,
        split: require(args.split, file.split, "split")?,
        reducer_model: args.reducer_model.or(file.reducer_model),
        model: require(args.model, file.model, "model")?,
        out: require(args.out, file.out, "out")?,
    };
    let reducer = settings.reducer_model.as_deref().map(load_reducer).transpose()?;
    let classifier: Box<dyn Classifier> =
        match load_model(&settings.model).with_context(|| format!("loading classifier {}", settings.model.display()))? {
            SavedModel::Rank1(m) => Box::new(m),
            SavedModel::Centroid(m) => Box::new(m),
            SavedModel::Reducer(_) => bail!(cmp_core::Error::InvalidArgument(format!(
                "{} holds a reducer, not a classifier",
                settings.model.display()
            ))),
        };
    let ids = read_split_ids(&settings.split, "test")?;
    if ids.is_empty() {
        bail!(cmp_core::Error::InvalidArgument("the test split is empty".into()));
    }
    let (test, _) = load_projected(&settings.archive, &ids, reducer.as_ref())?;
    let mut report = evaluate(classifier.as_ref(), &test)?;
    report.config = echo("eval", &settings);
    write_json(&settings.out, &report)
}
