mod common;

use cmp_core::dataio::LabeledDataset;
use cmp_core::model_io::{decode_model, encode_model, load_model, save_model, SavedModel};
use cmp_core::subspace::{class_phi, fit_cmp_with_splits, normalize, projected_scatter, PhiMean};
use cmp_core::synth::{csp_vectors, CspVectorsParams};
use cmp_core::tensor::{
    average_total_scatter, kron_chain, matricize, mean_tensor, mode_product, mode_scatter_matrix, DenseTensor,
    Matrix,
};
use cmp_core::{eig_symmetric, fit_cmp, fit_mpca, project, FitOptions, ModeSplit, ProjectionBasis, Reducer};
use common::*;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

fn names() -> [String; 2] {
    ["first".into(), "second".into()]
}

/// Two classes whose entries have different, randomly drawn spreads.
fn two_class(rng: &mut ChaCha8Rng, dims: &[usize], per_class: usize) -> LabeledDataset {
    let len: usize = dims.iter().product();
    let spreads: Vec<Vec<f64>> = (0..2).map(|_| (0..len).map(|_| rng.random_range(0.2..3.0)).collect()).collect();
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (label, spread) in spreads.iter().enumerate() {
        for _ in 0..per_class {
            let base = random_tensor(rng, dims);
            let data = base.data().iter().zip(spread).map(|(x, s)| x * s).collect();
            samples.push(DenseTensor::new(dims.to_vec(), data).unwrap());
            labels.push(label as u8);
        }
    }
    LabeledDataset::from_labeled(samples, labels, names()).unwrap()
}

fn random_basis(rng: &mut ChaCha8Rng, dims: &[usize], out: &[usize]) -> ProjectionBasis {
    ProjectionBasis::new(dims.iter().zip(out).map(|(&i, &p)| random_orthonormal(rng, i, p)).collect()).unwrap()
}

fn assert_close(a: &[f64], b: &[f64], tol: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length");
    let err = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err < tol, "{what}: max error {err:e}");
}

#[derive(Deserialize)]
struct Golden {
    dims: Vec<usize>,
    samples: Vec<Vec<Vec<f64>>>,
    whitening: Vec<Vec<f64>>,
    phi_eigenvalues: Vec<Vec<f64>>,
    basis: Vec<Vec<f64>>,
    projection_of_first_sample: Vec<f64>,
}

#[test]
fn single_iteration_matches_golden_trace() {
    let golden: Golden =
        serde_json::from_str(include_str!("data/cmp_single_iteration.json")).expect("golden file parses");
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (label, class) in golden.samples.iter().enumerate() {
        for s in class {
            samples.push(DenseTensor::new(golden.dims.clone(), s.clone()).unwrap());
            labels.push(label as u8);
        }
    }
    let data = LabeledDataset::from_labeled(samples, labels, names()).unwrap();
    let model = fit_cmp(&data, &[2, 2], &FitOptions { max_iter: 1, ..FitOptions::default() }).unwrap();
    assert_eq!(model.fit_report.iterations, 1);
    for k in 0..2 {
        assert_close(model.whitening.modes[k].z.data(), &golden.whitening[k], 1e-9, "whitening");
        assert_close(&model.phi_eigenvalues[k], &golden.phi_eigenvalues[k], 1e-9, "phi eigenvalues");
        assert_close(model.basis.matrices()[k].data(), &golden.basis[k], 1e-9, "basis");
    }
    let y = model.project(&data.samples[0]).unwrap();
    assert_eq!(y.dims(), &[2, 2]);
    assert_close(y.data(), &golden.projection_of_first_sample, 1e-9, "projection");
}

#[test]
fn normalize_whitens_every_mode() {
    let mut rng = rng(3);
    let data = two_class(&mut rng, &[3, 4], 10);
    let (w, normalized) = normalize(&data, 1e-10).unwrap();
    for n in 1..=2 {
        let classes = [data.class_samples(0), data.class_samples(1)];
        let r = mode_scatter_matrix(&classes[0], n, &mean_tensor(&classes[0]).unwrap())
            .unwrap()
            .add(&mode_scatter_matrix(&classes[1], n, &mean_tensor(&classes[1]).unwrap()).unwrap())
            .unwrap();
        let z = &w.modes[n - 1].z;
        let white = z.matmul(&r).unwrap().matmul(&z.transpose()).unwrap();
        assert!(white.sub(&Matrix::identity(z.rows())).unwrap().frobenius_norm() < 1e-8);
    }
    assert_eq!(normalized.labels, data.labels);
}

#[test]
fn normalize_vectors_sum_to_identity() {
    let data = csp_vectors(&CspVectorsParams::default(), 11).unwrap();
    let (_, normalized) = normalize(&data, 1e-10).unwrap();
    let c: Vec<Vec<DenseTensor>> = (0..2).map(|l| normalized.class_samples(l)).collect();
    let sum = mode_scatter_matrix(&c[0], 1, &mean_tensor(&c[0]).unwrap())
        .unwrap()
        .add(&mode_scatter_matrix(&c[1], 1, &mean_tensor(&c[1]).unwrap()).unwrap())
        .unwrap();
    assert!(sum.max_abs_diff(&Matrix::identity(8)) < 1e-8);
}

#[test]
fn normalize_leaves_whitened_data_unchanged() {
    // Class 0 = {+e_i}, class 1 = {-e_i} scaled so each class scatter is I/2.
    let d = 3;
    let scale = (d as f64 / 2.0).sqrt();
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (label, sign) in [(0u8, 1.0), (1, -1.0)] {
        for i in 0..d {
            for s in [sign, -sign] {
                samples.push(DenseTensor::from_fn(&[d], |k| if k[0] == i { s * scale } else { 0.0 }));
                labels.push(label);
            }
        }
    }
    let data = LabeledDataset::from_labeled(samples, labels, names()).unwrap();
    let (w, normalized) = normalize(&data, 1e-10).unwrap();
    assert!(w.modes[0].z.max_abs_diff(&Matrix::identity(d)) < 1e-12);
    for (a, b) in normalized.samples.iter().zip(&data.samples) {
        assert_close(a.data(), b.data(), 1e-12, "sample");
    }
}

#[test]
fn normalize_rejects_tiny_class() {
    let mut rng = rng(1);
    let mut data = two_class(&mut rng, &[2, 2], 3);
    let keep: Vec<usize> = (0..4).collect();
    data = data.subset(&keep);
    assert!(normalize(&data, 1e-10).is_err());
}

#[test]
fn class_phi_with_identity_basis_is_mode_scatter() {
    let mut rng = rng(5);
    let samples: Vec<_> = (0..9).map(|_| random_tensor(&mut rng, &[3, 2, 4])).collect();
    let mean = mean_tensor(&samples).unwrap();
    let basis = ProjectionBasis::identity(&[3, 2, 4]);
    for n in 1..=3 {
        let phi = class_phi(&samples, &mean, n, &basis).unwrap();
        let scatter = mode_scatter_matrix(&samples, n, &mean).unwrap();
        assert!(phi.max_abs_diff(&scatter) < 1e-13);
    }
}

#[test]
fn class_phi_of_single_sample_is_zero() {
    let mut rng = rng(6);
    let s = random_tensor(&mut rng, &[3, 3]);
    let basis = random_basis(&mut rng, &[3, 3], &[2, 2]);
    let phi = class_phi(std::slice::from_ref(&s), &s, 1, &basis).unwrap();
    assert_eq!(phi, Matrix::zeros(3, 3));
}

#[test]
fn class_phi_matches_kronecker_definition() {
    let mut rng = rng(7);
    let dims = [3, 4, 2];
    let samples: Vec<_> = (0..6).map(|_| random_tensor(&mut rng, &dims)).collect();
    let mean = mean_tensor(&samples).unwrap();
    let basis = random_basis(&mut rng, &dims, &[2, 3, 1]);
    for n in 1..=3 {
        let u_phi = kron_chain(basis.matrices(), n).unwrap();
        let p = u_phi.matmul(&u_phi.transpose()).unwrap();
        let mut oracle = Matrix::zeros(dims[n - 1], dims[n - 1]);
        for s in &samples {
            let a = matricize(&s.sub(&mean).unwrap(), n).unwrap();
            oracle = oracle.add(&a.matmul(&p).unwrap().matmul(&a.transpose()).unwrap()).unwrap();
        }
        let oracle = oracle.scale(1.0 / samples.len() as f64);
        assert!(class_phi(&samples, &mean, n, &basis).unwrap().max_abs_diff(&oracle) < 1e-12);
    }
}

#[test]
fn class_phi_errors() {
    let mut rng = rng(8);
    let s = vec![random_tensor(&mut rng, &[2, 3])];
    let mean = s[0].clone();
    assert!(class_phi(&s, &mean, 3, &ProjectionBasis::identity(&[2, 3])).is_err());
    assert!(class_phi(&s, &mean, 1, &ProjectionBasis::identity(&[3, 2])).is_err());
}

/// Whitens only mode `n` of each class, then checks that the sandwiched class
/// scatters under square orthogonal partners are complementary.
fn check_complementarity(rng: &mut ChaCha8Rng, dims: &[usize], per_class: usize) {
    let data = two_class(rng, dims, per_class);
    let square = random_basis(rng, dims, dims);
    for n in 1..=dims.len() {
        let classes = [data.class_samples(0), data.class_samples(1)];
        let means = [mean_tensor(&classes[0]).unwrap(), mean_tensor(&classes[1]).unwrap()];
        let r: Vec<Matrix> =
            (0..2).map(|i| mode_scatter_matrix(&classes[i], n, &means[i]).unwrap()).collect();
        let z = cmp_core::build_whitening(&r[0], &r[1], 1e-10).unwrap().z;
        let phis: Vec<Matrix> = (0..2)
            .map(|i| {
                let white: Vec<_> = classes[i].iter().map(|s| mode_product(s, &z, n).unwrap()).collect();
                class_phi(&white, &mean_tensor(&white).unwrap(), n, &square).unwrap()
            })
            .collect();
        let e1 = eig_symmetric(&phis[0]).unwrap();
        let e2 = eig_symmetric(&phis[1]).unwrap();
        let extent = dims[n - 1];
        for k in 0..extent {
            let sum = e1.values[k] + e2.values[extent - 1 - k];
            assert!((sum - 1.0).abs() < 1e-8, "mode {n}: pair sum {sum}");
            assert!(e1.values[k] > -1e-8 && e1.values[k] < 1.0 + 1e-8);
        }
        // Shared invariant subspaces, grouped by clusters of equal eigenvalues.
        let mut start = 0;
        while start < extent {
            let mut end = start + 1;
            while end < extent && e1.values[end - 1] - e1.values[end] < 1e-6 {
                end += 1;
            }
            let a = e1.vectors.select_columns(&(start..end).collect::<Vec<_>>());
            let b = e2.vectors.select_columns(&(extent - end..extent - start).collect::<Vec<_>>());
            let angle = max_principal_angle(&a, &b);
            assert!(angle < 1e-6, "mode {n}: principal angle {angle:e}");
            start = end;
        }
    }
}

#[test]
fn whitened_class_scatters_are_complementary() {
    let mut rng = rng(20);
    for case in 0..20 {
        let order = 1 + case % 3;
        let dims: Vec<usize> = (0..order).map(|_| rng.random_range(2..5)).collect();
        check_complementarity(&mut rng, &dims, 8);
    }
}

#[test]
fn identical_classes_sit_at_the_midpoint() {
    let mut rng = rng(21);
    let first: Vec<_> = (0..15).map(|_| random_tensor(&mut rng, &[5])).collect();
    let samples: Vec<_> = first.iter().chain(&first).cloned().collect();
    let labels = (0..30).map(|i| u8::from(i >= 15)).collect();
    let data = LabeledDataset::from_labeled(samples, labels, names()).unwrap();
    let model = fit_cmp(&data, &[2], &FitOptions::default()).unwrap();
    for v in &model.phi_eigenvalues[0] {
        assert!((v - 0.5).abs() < 1e-6, "eigenvalue {v}");
    }
}

#[test]
fn vector_case_recovers_csp_filters() {
    for seed in 0..10 {
        let data = csp_vectors(&CspVectorsParams::default(), seed).unwrap();
        let c0 = data.class_samples(0);
        let c1 = data.class_samples(1);
        let (r1, r2) = (vector_covariance(&c0), vector_covariance(&c1));
        for k in [1, 2] {
            let model = fit_cmp(&data, &[2 * k], &FitOptions::default()).unwrap();
            let filters = model.whitening.modes[0].z.transpose().matmul(&model.basis.matrices()[0]).unwrap();
            let oracle = csp_filters(&r1, &r2, k);
            let angle = max_principal_angle(&filters, &oracle);
            assert!(angle < 1e-6, "seed {seed}, k {k}: angle {angle:e}");
            // Largest and smallest blocks individually.
            let top = filters.select_columns(&(0..k).collect::<Vec<_>>());
            assert!(max_principal_angle(&top, &oracle.select_columns(&(0..k).collect::<Vec<_>>())) < 1e-6);
        }
    }
}

#[test]
fn kept_columns_follow_the_split() {
    let mut rng = rng(22);
    let data = two_class(&mut rng, &[5, 4], 12);
    let splits = [ModeSplit { largest: 2, smallest: 1 }, ModeSplit { largest: 0, smallest: 2 }];
    let model = fit_cmp_with_splits(&data, &splits, &FitOptions::default()).unwrap();
    assert_eq!(model.basis.output_dims(), vec![3, 2]);
    let (_, normalized) = normalize(&data, 1e-10).unwrap();
    let first = normalized.class_samples(0);
    let mean = mean_tensor(&first).unwrap();
    // Partners stay square while iterating, so the final Phi_n is the plain
    // mode-n scatter of the normalized first class.
    let expected = [vec![0, 1, 4], vec![3, 2]];
    for n in 1..=2 {
        let phi = mode_scatter_matrix(&first, n, &mean).unwrap();
        let u = &model.basis.matrices()[n - 1];
        for (j, &k) in expected[n - 1].iter().enumerate() {
            let v = u.select_columns(&[j]);
            let rayleigh = v.transpose().matmul(&phi).unwrap().matmul(&v).unwrap().get(0, 0);
            assert!((rayleigh - model.phi_eigenvalues[n - 1][k]).abs() < 1e-10);
        }
    }
    let values = &model.phi_eigenvalues[0];
    assert!(values.windows(2).all(|w| w[0] >= w[1]));
    assert!(fit_cmp(&data, &[3, 2], &FitOptions::default()).is_err());
    assert!(fit_cmp(&data, &[6, 2], &FitOptions::default()).is_err());
}

#[test]
fn label_swap_exchanges_the_blocks() {
    for seed in 0..5 {
        let data = csp_vectors(&CspVectorsParams::default(), 100 + seed).unwrap();
        let swapped = LabeledDataset::new(
            data.samples.clone(),
            data.labels.iter().map(|l| 1 - l).collect(),
            data.ids.clone(),
            [data.class_names[1].clone(), data.class_names[0].clone()],
            data.source_classes.clone(),
        )
        .unwrap();
        let a = fit_cmp(&data, &[4], &FitOptions::default()).unwrap();
        let b = fit_cmp(&swapped, &[4], &FitOptions::default()).unwrap();
        let (ua, ub) = (&a.basis.matrices()[0], &b.basis.matrices()[0]);
        assert!(max_principal_angle(ua, ub) < 1e-8);
        // Leading block of one is the trailing block of the other.
        let lead_a = ua.select_columns(&[0, 1]);
        let trail_b = ub.select_columns(&[2, 3]);
        assert!(max_principal_angle(&lead_a, &trail_b) < 1e-6);
    }
}

#[test]
fn fits_are_bitwise_deterministic() {
    let mut rng = rng(23);
    let data = two_class(&mut rng, &[4, 3, 3], 40);
    let a = fit_cmp(&data, &[2, 2, 2], &FitOptions::default()).unwrap();
    let b = fit_cmp(&data, &[2, 2, 2], &FitOptions::default()).unwrap();
    let ea = encode_model(&SavedModel::Reducer(Reducer::Cmp(a))).unwrap();
    let eb = encode_model(&SavedModel::Reducer(Reducer::Cmp(b))).unwrap();
    assert_eq!(ea, eb);
    let m1 = fit_mpca(&data.samples, &[2, 2, 2], &FitOptions::default()).unwrap();
    let m2 = fit_mpca(&data.samples, &[2, 2, 2], &FitOptions::default()).unwrap();
    assert_eq!(
        encode_model(&SavedModel::Reducer(Reducer::Mpca(m1))).unwrap(),
        encode_model(&SavedModel::Reducer(Reducer::Mpca(m2))).unwrap()
    );
}

#[test]
fn global_phi_mean_changes_only_the_centre() {
    let mut rng = rng(24);
    let data = two_class(&mut rng, &[3, 3], 10);
    let opts = FitOptions { phi_mean: PhiMean::Global, ..FitOptions::default() };
    let model = fit_cmp(&data, &[2, 2], &opts).unwrap();
    assert_eq!(model.phi_mean, PhiMean::Global);
    let decoded = decode_model(&encode_model(&SavedModel::Reducer(Reducer::Cmp(model.clone()))).unwrap()).unwrap();
    assert_eq!(decoded, SavedModel::Reducer(Reducer::Cmp(model)));
}

#[test]
fn model_round_trip_projects_bitwise() {
    let mut rng = rng(25);
    let data = two_class(&mut rng, &[4, 5], 15);
    let model = fit_cmp(&data, &[2, 4], &FitOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.cmpm");
    save_model(&path, &SavedModel::Reducer(Reducer::Cmp(model.clone()))).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded, SavedModel::Reducer(Reducer::Cmp(model.clone())));
    let SavedModel::Reducer(reducer) = loaded else { panic!("wrong kind") };
    for s in &data.samples {
        let a = model.project(s).unwrap();
        let b = reducer.project(s).unwrap();
        assert_eq!(a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
    let err = load_model(&path).unwrap_err();
    assert!(matches!(err, cmp_core::Error::Checksum { .. }), "{err}");
}

#[test]
fn mpca_vectors_match_pca() {
    let mut rng = rng(30);
    let scales = [4.0, 3.0, 2.5, 2.0, 1.5, 1.0, 0.7, 0.3];
    let q = random_orthonormal(&mut rng, 8, 8);
    let samples: Vec<_> = (0..200)
        .map(|_| {
            let z: Vec<f64> = scales.iter().map(|s| s * rng.random_range(-1.0..1.0)).collect();
            DenseTensor::new(vec![8], (0..8).map(|i| (0..8).map(|k| q.get(i, k) * z[k]).sum()).collect()).unwrap()
        })
        .collect();
    let (_, vectors) = eig_desc(&vector_covariance(&samples));
    for p in [1, 2, 4] {
        let model = fit_mpca(&samples, &[p], &FitOptions::default()).unwrap();
        let oracle = columns(&vectors, &(0..p).collect::<Vec<_>>());
        let angle = max_principal_angle(&model.basis.matrices()[0], &oracle);
        assert!(angle < 1e-8, "P = {p}: angle {angle:e}");
    }
}

#[test]
fn mpca_full_basis_keeps_scatter() {
    let mut rng = rng(31);
    let samples: Vec<_> = (0..20).map(|_| random_tensor(&mut rng, &[3, 4, 2])).collect();
    let model = fit_mpca(&samples, &[3, 4, 2], &FitOptions::default()).unwrap();
    let r = &model.fit_report;
    assert!((r.projected_scatter - r.input_scatter).abs() < 1e-9);
    assert!((r.input_scatter - average_total_scatter(&samples).unwrap()).abs() < 1e-12);
}

#[test]
fn mpca_captures_rank_one_data() {
    let mut rng = rng(32);
    let u = random_orthonormal(&mut rng, 4, 1).col(0);
    let v = random_orthonormal(&mut rng, 3, 1).col(0);
    let samples: Vec<_> = (0..25)
        .map(|_| {
            let c = rng.random_range(-3.0..3.0);
            DenseTensor::from_fn(&[4, 3], |i| c * u[i[0]] * v[i[1]])
        })
        .collect();
    let model = fit_mpca(&samples, &[1, 1], &FitOptions::default()).unwrap();
    let r = &model.fit_report;
    assert!((r.projected_scatter - r.input_scatter).abs() < 1e-9 * r.input_scatter.max(1.0));
}

#[test]
fn mpca_scatter_never_decreases() {
    let mut rng = rng(33);
    for _ in 0..20 {
        let dims: Vec<usize> = (0..3).map(|_| rng.random_range(3..6)).collect();
        let out: Vec<usize> = dims.iter().map(|&d| rng.random_range(1..d)).collect();
        let samples: Vec<_> = (0..15).map(|_| random_tensor(&mut rng, &dims)).collect();
        let model = fit_mpca(&samples, &out, &FitOptions { tol: 0.0, ..FitOptions::default() }).unwrap();
        let r = &model.fit_report;
        let mut prev = r.scatter[0];
        for &s in &r.mode_updates {
            assert!(s >= prev - 1e-10 * prev.max(1.0), "{s} < {prev}");
            prev = s;
        }
        assert!(r.projected_scatter <= r.input_scatter + 1e-9);
    }
}

#[test]
fn projection_is_linear_in_the_mean() {
    let mut rng = rng(34);
    let data = two_class(&mut rng, &[3, 4], 10);
    let model = fit_cmp(&data, &[2, 2], &FitOptions::default()).unwrap();
    let projected: Vec<_> = data.samples.iter().map(|s| model.project(s).unwrap()).collect();
    let a = mean_tensor(&projected).unwrap();
    let b = model.project(&mean_tensor(&data.samples).unwrap()).unwrap();
    assert_close(a.data(), b.data(), 1e-10, "mean");
}

#[test]
fn identity_projection_and_shape_errors() {
    let mut rng = rng(35);
    let t = random_tensor(&mut rng, &[2, 3]);
    let basis = ProjectionBasis::identity(&[2, 3]);
    assert_eq!(project(&basis, &t, None).unwrap(), t);
    assert!(project(&basis, &random_tensor(&mut rng, &[3, 2]), None).is_err());
    assert!(ProjectionBasis::new(vec![Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap()]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_never_increases_scatter(seed in any::<u64>(), order in 1usize..4) {
        let mut rng = rng(seed);
        let dims: Vec<usize> = (0..order).map(|_| rng.random_range(1..5)).collect();
        let out: Vec<usize> = dims.iter().map(|&d| rng.random_range(1..=d)).collect();
        let samples: Vec<_> = (0..6).map(|_| random_tensor(&mut rng, &dims)).collect();
        let mean = mean_tensor(&samples).unwrap();
        let basis = random_basis(&mut rng, &dims, &out);
        let projected = projected_scatter(&samples, &mean, &basis).unwrap();
        prop_assert!(projected <= average_total_scatter(&samples).unwrap() + 1e-9);
    }

    #[test]
    fn trace_identity_holds_in_every_mode(seed in any::<u64>(), order in 1usize..4) {
        let mut rng = rng(seed);
        let dims: Vec<usize> = (0..order).map(|_| rng.random_range(1..5)).collect();
        let out: Vec<usize> = dims.iter().map(|&d| rng.random_range(1..=d)).collect();
        let samples: Vec<_> = (0..7).map(|_| random_tensor(&mut rng, &dims)).collect();
        let mean = mean_tensor(&samples).unwrap();
        let basis = random_basis(&mut rng, &dims, &out);
        // Scatter of the projected tensors themselves.
        let projected: Vec<_> = samples.iter().map(|s| project(&basis, s, None).unwrap()).collect();
        let direct = average_total_scatter(&projected).unwrap();
        for n in 1..=order {
            let u = &basis.matrices()[n - 1];
            let phi = class_phi(&samples, &mean, n, &basis).unwrap();
            let trace = u.transpose().matmul(&phi).unwrap().matmul(u).unwrap().trace();
            prop_assert!((trace - direct).abs() < 1e-9, "mode {}: {} vs {}", n, trace, direct);
        }
    }
}
