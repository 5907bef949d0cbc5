mod common;

use cmp_core::tensor::{
    average_total_scatter, dematricize, frobenius_norm, kron_chain, matricize, mean_tensor, mode_product,
    mode_scatter_matrix, multi_mode_product, scalar_product, DenseTensor, Matrix,
};
use cmp_core::{project, ProjectionBasis};
use common::*;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_dims(rng: &mut ChaCha8Rng, max_order: usize, max_extent: usize) -> Vec<usize> {
    let order = rng.random_range(1..=max_order);
    (0..order).map(|_| rng.random_range(1..=max_extent)).collect()
}

/// Brute-force n-mode product straight from the index definition.
fn mode_product_oracle(t: &DenseTensor, m: &Matrix, mode: usize) -> DenseTensor {
    let mut dims = t.dims().to_vec();
    dims[mode - 1] = m.rows();
    DenseTensor::from_fn(&dims, |idx| {
        let mut src = idx.to_vec();
        (0..m.cols())
            .map(|i| {
                src[mode - 1] = i;
                m.get(idx[mode - 1], i) * t.get(&src)
            })
            .sum()
    })
}

#[test]
fn eq4_identity_on_random_cases() {
    let start = std::time::Instant::now();
    let mut rng = rng(2024);
    for _ in 0..200 {
        let dims = random_dims(&mut rng, 4, 5);
        let out: Vec<usize> = dims.iter().map(|&d| rng.random_range(1..=d)).collect();
        let basis = ProjectionBasis::new(dims.iter().zip(&out).map(|(&i, &p)| random_orthonormal(&mut rng, i, p)).collect())
            .unwrap();
        let t = random_tensor(&mut rng, &dims);
        let y = project(&basis, &t, None).unwrap();
        for n in 1..=dims.len() {
            let lhs = matricize(&y, n).unwrap();
            let u = &basis.matrices()[n - 1];
            let rhs = u
                .transpose()
                .matmul(&matricize(&t, n).unwrap())
                .unwrap()
                .matmul(&kron_chain(basis.matrices(), n).unwrap())
                .unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-10, "dims {dims:?} mode {n}");
        }
    }
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn mode_product_matches_index_definition() {
    let mut rng = rng(1);
    for _ in 0..40 {
        let dims = random_dims(&mut rng, 4, 4);
        let t = random_tensor(&mut rng, &dims);
        let n = rng.random_range(1..=dims.len());
        let rows = rng.random_range(1..5);
        let m = random_matrix(&mut rng, rows, dims[n - 1]);
        let fast = mode_product(&t, &m, n).unwrap();
        let slow = mode_product_oracle(&t, &m, n);
        assert_eq!(fast.dims(), slow.dims());
        let err = fast.data().iter().zip(slow.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }
}

#[test]
fn matricized_columns_are_fibers() {
    // Every column of the unfolding is a mode-n fiber, and every fiber appears once.
    let mut rng = rng(2);
    let dims = [3, 2, 4];
    let t = random_tensor(&mut rng, &dims);
    for n in 1..=3 {
        let m = matricize(&t, n).unwrap();
        let mut seen = 0;
        let others: Vec<usize> = (0..3).filter(|&k| k != n - 1).collect();
        for a in 0..dims[others[0]] {
            for b in 0..dims[others[1]] {
                let mut idx = [0usize; 3];
                idx[others[0]] = a;
                idx[others[1]] = b;
                let fiber: Vec<f64> = (0..dims[n - 1])
                    .map(|i| {
                        idx[n - 1] = i;
                        t.get(&idx)
                    })
                    .collect();
                seen += (0..m.cols()).filter(|&c| m.col(c) == fiber).count();
            }
        }
        assert_eq!(seen, m.cols());
    }
}

#[test]
fn scatter_of_identical_samples_is_zero() {
    let t = DenseTensor::from_fn(&[2, 3], |i| (i[0] + 2 * i[1]) as f64);
    let samples = vec![t.clone(), t.clone(), t];
    let mean = mean_tensor(&samples).unwrap();
    assert_eq!(mode_scatter_matrix(&samples, 2, &mean).unwrap(), Matrix::zeros(3, 3));
    assert_eq!(average_total_scatter(&samples).unwrap(), 0.0);
}

#[test]
fn kron_chain_matches_nalgebra() {
    let mut rng = rng(3);
    let us: Vec<Matrix> = [(2, 1), (3, 2), (2, 2)].iter().map(|&(r, c)| random_matrix(&mut rng, r, c)).collect();
    // Mode 2: U_3 (x) U_1.
    let oracle = to_na(&us[2]).kronecker(&to_na(&us[0]));
    assert!(kron_chain(&us, 2).unwrap().max_abs_diff(&from_na(&oracle)) < 1e-15);
    let oracle = to_na(&us[1]).kronecker(&to_na(&us[2]));
    assert!(kron_chain(&us, 1).unwrap().max_abs_diff(&from_na(&oracle)) < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matricize_round_trip(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let dims = random_dims(&mut rng, 4, 6);
        let t = random_tensor(&mut rng, &dims);
        for n in 1..=dims.len() {
            let back = dematricize(&matricize(&t, n).unwrap(), n, &dims).unwrap();
            prop_assert_eq!(&back, &t);
        }
    }

    #[test]
    fn mode_product_acts_on_the_unfolding(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let dims = random_dims(&mut rng, 4, 5);
        let t = random_tensor(&mut rng, &dims);
        let n = rng.random_range(1..=dims.len());
        let rows = rng.random_range(1..6);
        let m = random_matrix(&mut rng, rows, dims[n - 1]);
        let lhs = matricize(&mode_product(&t, &m, n).unwrap(), n).unwrap();
        let rhs = m.matmul(&matricize(&t, n).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn norm_is_unfolding_invariant(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let dims = random_dims(&mut rng, 4, 5);
        let t = random_tensor(&mut rng, &dims);
        let norm = frobenius_norm(&t);
        prop_assert!((norm - scalar_product(&t, &t).unwrap().sqrt()).abs() <= 1e-12 * norm.max(1.0));
        for n in 1..=dims.len() {
            let m = matricize(&t, n).unwrap().frobenius_norm();
            prop_assert!((norm - m).abs() <= 1e-14 * norm.max(1.0));
        }
    }

    #[test]
    fn distinct_mode_products_commute(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let mut dims = random_dims(&mut rng, 4, 5);
        if dims.len() == 1 {
            dims.push(3);
        }
        let t = random_tensor(&mut rng, &dims);
        let a = rng.random_range(1..=dims.len());
        let b = (a % dims.len()) + 1;
        let ma = random_matrix(&mut rng, 3, dims[a - 1]);
        let mb = random_matrix(&mut rng, 2, dims[b - 1]);
        let ab = mode_product(&mode_product(&t, &ma, a).unwrap(), &mb, b).unwrap();
        let ba = mode_product(&mode_product(&t, &mb, b).unwrap(), &ma, a).unwrap();
        prop_assert_eq!(ab.dims(), ba.dims());
        let err = ab.data().iter().zip(ba.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn projection_chain_matches_kronecker_form(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let dims = random_dims(&mut rng, 4, 4);
        let t = random_tensor(&mut rng, &dims);
        let us: Vec<Matrix> = dims
            .iter()
            .map(|&d| {
                let cols = rng.random_range(1..=d);
                random_matrix(&mut rng, d, cols)
            })
            .collect();
        let transposes: Vec<Matrix> = us.iter().map(Matrix::transpose).collect();
        let y = multi_mode_product(&t, &transposes).unwrap();
        for n in 1..=dims.len() {
            let rhs = us[n - 1].transpose().matmul(&matricize(&t, n).unwrap()).unwrap()
                .matmul(&kron_chain(&us, n).unwrap()).unwrap();
            prop_assert!(matricize(&y, n).unwrap().max_abs_diff(&rhs) < 1e-10);
        }
    }

    #[test]
    fn mode_scatter_is_symmetric_psd_with_trace_identity(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let dims = random_dims(&mut rng, 3, 5);
        let samples: Vec<_> = (0..rng.random_range(1..8)).map(|_| random_tensor(&mut rng, &dims)).collect();
        let mean = mean_tensor(&samples).unwrap();
        let total = average_total_scatter(&samples).unwrap();
        for n in 1..=dims.len() {
            let s = mode_scatter_matrix(&samples, n, &mean).unwrap();
            prop_assert!(s.asymmetry() < 1e-12);
            let (values, _) = eig_desc(&s);
            prop_assert!(*values.last().unwrap() >= -1e-10);
            prop_assert!((s.trace() - total).abs() < 1e-10 * total.max(1.0));
        }
    }
}
