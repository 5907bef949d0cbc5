//! Classifiers used to score projected tensors: a rank-1 tensor logistic
//! regression and a nearest-centroid baseline, plus accuracy evaluation.

use serde::{Deserialize, Serialize};

use crate::dataio::LabeledDataset;
use crate::error::{Error, Result};
use crate::tensor::{average_total_scatter, frobenius_norm, mean_tensor, mode_product, DenseTensor, Matrix};

/// Anything that assigns a binary label to a tensor.
pub trait Classifier {
    fn input_dims(&self) -> Vec<usize>;
    fn predict(&self, t: &DenseTensor) -> Result<u8>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub lr: f64,
    pub lambda: f64,
    pub inner_steps: usize,
    pub epochs: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { lr: 0.1, lambda: 1e-4, inner_steps: 50, epochs: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: usize,
    /// Training objective before the first epoch and after each epoch.
    pub loss: Vec<f64>,
}

/// Logistic classifier whose weight tensor is `scale * w_1 o w_2 o ... o w_N`
/// with unit-norm factors. The score is `scale * <S, w_1 o ... o w_N> + bias`
/// and label 1 is predicted when its sigmoid exceeds 0.5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rank1Classifier {
    pub factors: Vec<Vec<f64>>,
    pub scale: f64,
    pub bias: f64,
    pub training_report: TrainingReport,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The logistic subproblem for one factor with the others held fixed:
/// `L(v, b) = (1/M) sum [softplus(v.x_m + b) - y_m (v.x_m + b)] + lambda |v|^2`,
/// where `v = scale * w_n`.
#[derive(Clone, Debug)]
pub struct BlockProblem {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub lambda: f64,
}

impl BlockProblem {
    pub fn loss(&self, v: &[f64], b: f64) -> f64 {
        let m = self.features.len() as f64;
        let data: f64 = self
            .features
            .iter()
            .zip(&self.targets)
            .map(|(x, y)| {
                let z = dot(v, x) + b;
                softplus(z) - y * z
            })
            .sum();
        data / m + self.lambda * dot(v, v)
    }

    /// Gradient with respect to `v` and `b`.
    pub fn gradient(&self, v: &[f64], b: f64) -> (Vec<f64>, f64) {
        let m = self.features.len() as f64;
        let mut gv = vec![0.0; v.len()];
        let mut gb = 0.0;
        for (x, y) in self.features.iter().zip(&self.targets) {
            let r = sigmoid(dot(v, x) + b) - y;
            gb += r;
            for (g, xi) in gv.iter_mut().zip(x) {
                *g += r * xi;
            }
        }
        for (g, vi) in gv.iter_mut().zip(v) {
            *g = *g / m + 2.0 * self.lambda * vi;
        }
        (gv, gb / m)
    }
}

impl Rank1Classifier {
    /// Builds a classifier from raw factors, moving their norms into `scale`.
    pub fn new(factors: Vec<Vec<f64>>, scale: f64, bias: f64) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(Vec::is_empty) {
            return Err(Error::invalid("rank-1 factors must be nonempty"));
        }
        let mut scale = scale;
        let factors = factors
            .into_iter()
            .map(|f| {
                let n = norm(&f);
                if n == 0.0 || !n.is_finite() {
                    return Err(Error::invalid("rank-1 factor has zero or non-finite norm"));
                }
                scale *= n;
                Ok(f.into_iter().map(|x| x / n).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Rank1Classifier { factors, scale, bias, training_report: TrainingReport { epochs: 0, loss: Vec::new() } })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Vec::len).collect()
    }

    fn check(&self, t: &DenseTensor) -> Result<()> {
        if t.dims() != self.dims().as_slice() {
            return Err(Error::shape(format!("tensor dims {:?}, classifier expects {:?}", t.dims(), self.dims())));
        }
        Ok(())
    }

    /// Contracts every mode except `mode` (1-based) with its factor, giving
    /// `matricize(t, mode) * kron_chain(factors, mode)` as a vector.
    pub fn block_features(&self, t: &DenseTensor, mode: usize) -> Result<Vec<f64>> {
        self.check(t)?;
        let mut out = t.clone();
        for (k, w) in self.factors.iter().enumerate() {
            if k + 1 != mode {
                out = mode_product(&out, &Matrix::new(1, w.len(), w.clone())?, k + 1)?;
            }
        }
        Ok(out.into_data())
    }

    /// `scale * <t, w_1 o ... o w_N> + bias`.
    pub fn score(&self, t: &DenseTensor) -> Result<f64> {
        let x = self.block_features(t, 1)?;
        Ok(self.scale * dot(&self.factors[0], &x) + self.bias)
    }

    pub fn probability(&self, t: &DenseTensor) -> Result<f64> {
        Ok(sigmoid(self.score(t)?))
    }

    /// The subproblem for factor `mode` (1-based) over `data`.
    pub fn block_problem(&self, data: &LabeledDataset, mode: usize, lambda: f64) -> Result<BlockProblem> {
        if mode == 0 || mode > self.factors.len() {
            return Err(Error::ModeOutOfRange { mode, order: self.factors.len() });
        }
        let features = data.samples.iter().map(|s| self.block_features(s, mode)).collect::<Result<Vec<_>>>()?;
        Ok(BlockProblem { features, targets: data.labels.iter().map(|&l| f64::from(l)).collect(), lambda })
    }

    /// Full training objective at the current parameters.
    pub fn objective(&self, data: &LabeledDataset, lambda: f64) -> Result<f64> {
        let p = self.block_problem(data, 1, lambda)?;
        let v: Vec<f64> = self.factors[0].iter().map(|w| w * self.scale).collect();
        Ok(p.loss(&v, self.bias))
    }
}

impl Classifier for Rank1Classifier {
    fn input_dims(&self) -> Vec<usize> {
        self.dims()
    }

    fn predict(&self, t: &DenseTensor) -> Result<u8> {
        Ok(u8::from(self.probability(t)? > 0.5))
    }
}

/// Alternating block training of a [`Rank1Classifier`].
///
/// Training runs on samples centered at their mean and divided by their
/// per-entry RMS deviation; both steps are folded back into `scale` and `bias` at the end,
/// so the returned model scores raw tensors. The recorded loss is the
/// objective in those training coordinates.
///
/// Each block runs `inner_steps` full-batch gradient steps on `(v, b)`,
/// halving the step whenever it would raise the objective, so the recorded
/// loss never increases. Factors start at normalized all-ones vectors with
/// `scale = 1` and `bias = 0`.
pub fn train_rank1(train: &LabeledDataset, opts: &TrainOptions) -> Result<Rank1Classifier> {
    train.require_both_classes(1)?;
    if !(opts.lr > 0.0 && opts.lr.is_finite()) || !(opts.lambda >= 0.0 && opts.lambda.is_finite()) {
        return Err(Error::invalid(format!("invalid learning rate {} or penalty {}", opts.lr, opts.lambda)));
    }
    let center = mean_tensor(&train.samples)?;
    let rms = (average_total_scatter(&train.samples)? / center.len() as f64).sqrt();
    let rms = if rms > 0.0 { rms } else { 1.0 };
    let standardized = train.map_samples(|s| Ok(s.sub(&center)?.scale(1.0 / rms)))?;
    let mut model = train_standardized(&standardized, opts)?;
    // score(S) = (scale / rms) <S - center, W> + bias
    model.scale /= rms;
    let at_center = model.score(&center)? - model.bias;
    model.bias -= at_center;
    Ok(model)
}

fn train_standardized(train: &LabeledDataset, opts: &TrainOptions) -> Result<Rank1Classifier> {
    let dims = train.dims().expect("nonempty").to_vec();
    let factors = dims.iter().map(|&d| vec![1.0 / (d as f64).sqrt(); d]).collect();
    let mut model = Rank1Classifier {
        factors,
        scale: 1.0,
        bias: 0.0,
        training_report: TrainingReport { epochs: 0, loss: Vec::new() },
    };
    let initial = model.objective(train, opts.lambda)?;
    if !initial.is_finite() {
        return Err(Error::Divergence { learning_rate: opts.lr });
    }
    let mut losses = vec![initial];
    for _ in 0..opts.epochs {
        let mut current = *losses.last().expect("nonempty");
        for n in 0..dims.len() {
            let problem = model.block_problem(train, n + 1, opts.lambda)?;
            let mut v: Vec<f64> = model.factors[n].iter().map(|w| w * model.scale).collect();
            let mut b = model.bias;
            current = problem.loss(&v, b);
            for _ in 0..opts.inner_steps {
                let (gv, gb) = problem.gradient(&v, b);
                let mut lr = opts.lr;
                let mut accepted = false;
                for _ in 0..60 {
                    let tv: Vec<f64> = v.iter().zip(&gv).map(|(x, g)| x - lr * g).collect();
                    let tb = b - lr * gb;
                    let l = problem.loss(&tv, tb);
                    if !l.is_finite() {
                        return Err(Error::Divergence { learning_rate: lr });
                    }
                    if l <= current {
                        v = tv;
                        b = tb;
                        current = l;
                        accepted = true;
                        break;
                    }
                    lr *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
            let scale = norm(&v);
            if scale > 0.0 {
                model.factors[n] = v.iter().map(|x| x / scale).collect();
            }
            model.scale = scale;
            model.bias = b;
        }
        losses.push(current);
    }
    model.training_report = TrainingReport { epochs: opts.epochs, loss: losses };
    Ok(model)
}

/// Nearest class mean in Frobenius distance; ties go to label 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearestCentroid {
    pub centroids: [DenseTensor; 2],
}

pub fn train_nearest_centroid(train: &LabeledDataset) -> Result<NearestCentroid> {
    train.require_both_classes(1)?;
    Ok(NearestCentroid { centroids: [mean_tensor(&train.class_samples(0))?, mean_tensor(&train.class_samples(1))?] })
}

impl Classifier for NearestCentroid {
    fn input_dims(&self) -> Vec<usize> {
        self.centroids[0].dims().to_vec()
    }

    fn predict(&self, t: &DenseTensor) -> Result<u8> {
        let d0 = frobenius_norm(&t.sub(&self.centroids[0])?);
        let d1 = frobenius_norm(&t.sub(&self.centroids[1])?);
        Ok(u8::from(d1 < d0))
    }
}

/// Test-set accuracy summary. `confusion[true][predicted]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    /// `None` when the test set has no sample of that class.
    pub per_class_accuracy: [Option<f64>; 2],
    pub confusion: [[usize; 2]; 2],
    pub test_size: usize,
    pub class_names: [String; 2],
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn correct(&self) -> usize {
        self.confusion[0][0] + self.confusion[1][1]
    }
}

pub fn evaluate(model: &dyn Classifier, test: &LabeledDataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let dims = test.dims().expect("nonempty");
    if dims != model.input_dims().as_slice() {
        return Err(Error::shape(format!("test samples {dims:?}, classifier trained on {:?}", model.input_dims())));
    }
    let mut confusion = [[0usize; 2]; 2];
    for (s, &y) in test.samples.iter().zip(&test.labels) {
        confusion[y as usize][model.predict(s)? as usize] += 1;
    }
    let per_class = [0, 1].map(|c| {
        let total = confusion[c][0] + confusion[c][1];
        (total > 0).then(|| confusion[c][c] as f64 / total as f64)
    });
    Ok(EvalReport {
        overall_accuracy: (confusion[0][0] + confusion[1][1]) as f64 / test.len() as f64,
        per_class_accuracy: per_class,
        confusion,
        test_size: test.len(),
        class_names: test.class_names.clone(),
        config: serde_json::Value::Null,
    })
}
