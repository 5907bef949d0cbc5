//! Binary container for fitted reducers and classifiers.
//!
//! ```text
//! "CMPM" | version u16 | kind u8 | mode count u8
//! mode count x u32 input extents | mode count x u32 output extents
//! kind-specific payload | CRC32 of all preceding bytes
//! ```
//!
//! Integers are little-endian; reals are `f64` little-endian and matrices
//! are written row-major. Kinds: 0 MPCA, 1 CMP, 2 rank-1 classifier,
//! 3 nearest centroid, 4 pass-through reducer.

use std::fs;
use std::path::Path;

use crate::classify::{NearestCentroid, Rank1Classifier, TrainingReport};
use crate::eigen::{EigenSystem, ModeWhitening, WhiteningTransform};
use crate::error::{Error, Result};
use crate::subspace::{CmpModel, FitReport, ModeSplit, MpcaModel, PhiMean, ProjectionBasis, Reducer};
use crate::tensor::{DenseTensor, Matrix};

pub const MODEL_MAGIC: &[u8; 4] = b"CMPM";
pub const MODEL_VERSION: u16 = 1;

const KIND_MPCA: u8 = 0;
const KIND_CMP: u8 = 1;
const KIND_RANK1: u8 = 2;
const KIND_CENTROID: u8 = 3;
const KIND_IDENTITY: u8 = 4;

/// Anything the container can hold.
#[derive(Clone, Debug, PartialEq)]
pub enum SavedModel {
    Reducer(Reducer),
    Rank1(Rank1Classifier),
    Centroid(NearestCentroid),
}

impl SavedModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SavedModel::Reducer(Reducer::Identity(_)) => "identity",
            SavedModel::Reducer(Reducer::Mpca(_)) => "mpca",
            SavedModel::Reducer(Reducer::Cmp(_)) => "cmp",
            SavedModel::Rank1(_) => "rank1",
            SavedModel::Centroid(_) => "centroid",
        }
    }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::invalid(format!("{v} does not fit in u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn reals(&mut self, v: &[f64]) {
        v.iter().for_each(|x| self.f64(*x));
    }
    fn counted_reals(&mut self, v: &[f64]) -> Result<()> {
        self.u32(v.len())?;
        self.reals(v);
        Ok(())
    }
    fn string(&mut self, s: &str) -> Result<()> {
        self.u32(s.len())?;
        self.0.extend_from_slice(s.as_bytes());
        Ok(())
    }
    fn report(&mut self, r: &FitReport) -> Result<()> {
        self.u32(r.iterations)?;
        self.u8(u8::from(r.converged));
        self.f64(r.input_scatter);
        self.f64(r.projected_scatter);
        self.counted_reals(&r.scatter)?;
        self.counted_reals(&r.mode_updates)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(Error::Truncated {
            expected: self.pos.saturating_add(n),
            found: self.bytes.len(),
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn reals(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn counted_reals(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()?;
        self.reals(n)
    }
    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        Matrix::new(rows, cols, self.reals(rows * cols)?)
    }
    fn tensor(&mut self, dims: &[usize]) -> Result<DenseTensor> {
        DenseTensor::new(dims.to_vec(), self.reals(dims.iter().product())?)
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Format(format!("bad utf-8 in model: {e}")))
    }
    fn report(&mut self) -> Result<FitReport> {
        Ok(FitReport {
            iterations: self.u32()?,
            converged: self.u8()? != 0,
            input_scatter: self.f64()?,
            projected_scatter: self.f64()?,
            scatter: self.counted_reals()?,
            mode_updates: self.counted_reals()?,
        })
    }
}

fn extents(model: &SavedModel) -> (Vec<usize>, Vec<usize>) {
    match model {
        SavedModel::Reducer(r) => (r.input_dims(), r.output_dims()),
        SavedModel::Rank1(c) => (c.dims(), c.dims()),
        SavedModel::Centroid(c) => {
            let d = c.centroids[0].dims().to_vec();
            (d.clone(), d)
        }
    }
}

pub fn encode_model(model: &SavedModel) -> Result<Vec<u8>> {
    let (input, output) = extents(model);
    let mut w = Writer::default();
    w.0.extend_from_slice(MODEL_MAGIC);
    w.0.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    w.u8(match model {
        SavedModel::Reducer(Reducer::Mpca(_)) => KIND_MPCA,
        SavedModel::Reducer(Reducer::Cmp(_)) => KIND_CMP,
        SavedModel::Reducer(Reducer::Identity(_)) => KIND_IDENTITY,
        SavedModel::Rank1(_) => KIND_RANK1,
        SavedModel::Centroid(_) => KIND_CENTROID,
    });
    w.u8(u8::try_from(input.len()).map_err(|_| Error::invalid("more than 255 modes"))?);
    for &d in input.iter().chain(&output) {
        w.u32(d)?;
    }
    match model {
        SavedModel::Reducer(Reducer::Identity(_)) => {}
        SavedModel::Reducer(Reducer::Mpca(m)) => {
            for u in m.basis.matrices() {
                w.reals(u.data());
            }
            w.reals(m.global_mean.data());
            for values in &m.phi_eigenvalues {
                w.counted_reals(values)?;
            }
            w.report(&m.fit_report)?;
        }
        SavedModel::Reducer(Reducer::Cmp(m)) => {
            w.f64(m.whitening.epsilon);
            w.u8(match m.phi_mean {
                PhiMean::Class => 0,
                PhiMean::Global => 1,
            });
            for name in &m.class_names {
                w.string(name)?;
            }
            for (k, mode) in m.whitening.modes.iter().enumerate() {
                w.reals(mode.z.data());
                w.reals(&mode.eigen.values);
                w.reals(mode.eigen.vectors.data());
                w.u32(mode.clipped)?;
                w.reals(m.basis.matrices()[k].data());
                w.u32(m.splits[k].largest)?;
                w.u32(m.splits[k].smallest)?;
                w.counted_reals(&m.phi_eigenvalues[k])?;
            }
            for mean in &m.class_means {
                w.reals(mean.data());
            }
            w.report(&m.fit_report)?;
        }
        SavedModel::Rank1(c) => {
            w.f64(c.scale);
            w.f64(c.bias);
            for f in &c.factors {
                w.reals(f);
            }
            w.u32(c.training_report.epochs)?;
            w.counted_reals(&c.training_report.loss)?;
        }
        SavedModel::Centroid(c) => {
            for centroid in &c.centroids {
                w.reals(centroid.data());
            }
        }
    }
    let crc = crc32fast::hash(&w.0);
    w.0.extend_from_slice(&crc.to_le_bytes());
    Ok(w.0)
}

pub fn decode_model(bytes: &[u8]) -> Result<SavedModel> {
    const FIXED: usize = 8;
    if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    if bytes.len() < FIXED + 4 {
        return Err(Error::Truncated { expected: FIXED + 4, found: bytes.len() });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let version = u16::from_le_bytes([body[4], body[5]]);
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch { found: version, expected: MODEL_VERSION });
    }
    let mut r = Reader { bytes: body, pos: 6 };
    let kind = r.u8()?;
    let order = r.u8()? as usize;
    if order == 0 {
        return Err(Error::Format("model with zero modes".into()));
    }
    let input = (0..order).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let output = (0..order).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    if input.iter().chain(&output).any(|&d| d == 0) {
        return Err(Error::Format("model extents must be positive".into()));
    }

    let model = match kind {
        KIND_IDENTITY => SavedModel::Reducer(Reducer::Identity(input)),
        KIND_MPCA => {
            let matrices = input.iter().zip(&output).map(|(&i, &p)| r.matrix(i, p)).collect::<Result<Vec<_>>>()?;
            let global_mean = r.tensor(&input)?;
            let phi_eigenvalues = (0..order).map(|_| r.counted_reals()).collect::<Result<Vec<_>>>()?;
            SavedModel::Reducer(Reducer::Mpca(MpcaModel {
                basis: ProjectionBasis::new(matrices)?,
                global_mean,
                phi_eigenvalues,
                fit_report: r.report()?,
            }))
        }
        KIND_CMP => {
            let epsilon = r.f64()?;
            let phi_mean = match r.u8()? {
                0 => PhiMean::Class,
                1 => PhiMean::Global,
                other => return Err(Error::Format(format!("unknown phi mean tag {other}"))),
            };
            let class_names = [r.string()?, r.string()?];
            let mut modes = Vec::with_capacity(order);
            let mut matrices = Vec::with_capacity(order);
            let mut splits = Vec::with_capacity(order);
            let mut phi_eigenvalues = Vec::with_capacity(order);
            for (&i, &p) in input.iter().zip(&output) {
                let z = r.matrix(i, i)?;
                let values = r.reals(i)?;
                let vectors = r.matrix(i, i)?;
                let clipped = r.u32()?;
                modes.push(ModeWhitening { z, eigen: EigenSystem { values, vectors }, clipped });
                matrices.push(r.matrix(i, p)?);
                splits.push(ModeSplit { largest: r.u32()?, smallest: r.u32()? });
                phi_eigenvalues.push(r.counted_reals()?);
            }
            let class_means = [r.tensor(&input)?, r.tensor(&input)?];
            SavedModel::Reducer(Reducer::Cmp(CmpModel {
                whitening: WhiteningTransform { modes, epsilon },
                basis: ProjectionBasis::new(matrices)?,
                splits,
                class_means,
                phi_eigenvalues,
                class_names,
                phi_mean,
                fit_report: r.report()?,
            }))
        }
        KIND_RANK1 => {
            let scale = r.f64()?;
            let bias = r.f64()?;
            let factors = input.iter().map(|&p| r.reals(p)).collect::<Result<Vec<_>>>()?;
            let epochs = r.u32()?;
            let loss = r.counted_reals()?;
            SavedModel::Rank1(Rank1Classifier { factors, scale, bias, training_report: TrainingReport { epochs, loss } })
        }
        KIND_CENTROID => SavedModel::Centroid(NearestCentroid { centroids: [r.tensor(&input)?, r.tensor(&input)?] }),
        other => return Err(Error::Format(format!("unknown model kind {other}"))),
    };
    if r.pos != body.len() {
        return Err(Error::Format(format!("{} trailing bytes after model payload", body.len() - r.pos)));
    }
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, model: &SavedModel) -> Result<()> {
    fs::write(path, encode_model(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    decode_model(&fs::read(path)?)
}
