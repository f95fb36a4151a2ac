mod common;

use common::{assert_gaussian_moments, from_na, moments, to_na};
use lmafield::sparse::{CholeskyFactor, SparseMatrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_spd(n: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    let mut rowsum = vec![0.0; n];
    for i in 0..n {
        for j in 0..i {
            if rng.random::<f64>() < density {
                let v: f64 = rng.random_range(-1.0..1.0);
                t.push((i, j, v));
                rowsum[i] += v.abs();
                rowsum[j] += v.abs();
            }
        }
    }
    for i in 0..n {
        t.push((i, i, rowsum[i] + rng.random_range(0.1..2.0)));
    }
    SparseMatrix::from_symmetric_triplets(n, &t).unwrap()
}

fn reconstruction_error(m: &SparseMatrix) -> f64 {
    let f = CholeskyFactor::factorize(m).unwrap();
    let l = to_na(&f.factor_matrix());
    let perm = f.permutation();
    let a = to_na(m);
    let pap = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(perm[i], perm[j])]);
    (&l * l.transpose() - &pap).norm() / pap.norm()
}

#[test]
fn tridiagonal_reconstruction() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 10;
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 3.0 + rng.random::<f64>()));
        if i > 0 {
            t.push((i, i - 1, rng.random_range(-1.0..1.0)));
        }
    }
    let m = SparseMatrix::from_symmetric_triplets(n, &t).unwrap();
    assert!(reconstruction_error(&m) < 1e-10);
}

#[test]
fn path_laplacian_log_det_matches_dense() {
    // L = I + path Laplacian on 8 nodes
    let n = 8;
    let mut t = Vec::new();
    for i in 0..n {
        let deg = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
        t.push((i, i, 1.0 + deg));
        if i > 0 {
            t.push((i, i - 1, -1.0));
        }
    }
    let m = SparseMatrix::from_symmetric_triplets(n, &t).unwrap();
    let dense = to_na(&m).lu().determinant().ln();
    let f = CholeskyFactor::factorize(&m).unwrap();
    assert!((f.log_det() - dense).abs() < 1e-10);
}

#[test]
fn random_solve_matches_dense() {
    let m = random_spd(12, 0.3, 5);
    let b: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
    let x = CholeskyFactor::factorize(&m).unwrap().solve(&b).unwrap();
    let xd = to_na(&m).cholesky().unwrap().solve(&DVector::from_vec(b.clone()));
    let r = m.mul_vec(&x);
    let res: f64 = r.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(res / bn < 1e-8);
    for i in 0..12 {
        assert!((x[i] - xd[i]).abs() < 1e-10);
    }
}

#[test]
fn precision_sampling_two_by_two() {
    let q = from_na(&DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]));
    let f = CholeskyFactor::factorize(&q).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let draws: Vec<Vec<f64>> = (0..100_000)
        .map(|_| f.sample_gaussian_precision(&[1.0, 0.0], &mut rng).unwrap())
        .collect();
    let (mean, cov) = moments(&draws);
    let inv = vec![vec![2.0 / 3.0, 1.0 / 3.0], vec![1.0 / 3.0, 2.0 / 3.0]];
    // mean = Q⁻¹ (1, 0)
    let target_mean = vec![2.0 / 3.0, 1.0 / 3.0];
    assert_gaussian_moments(&mean, &cov, &target_mean, &inv, 100_000.0, 3.0);
}

#[test]
fn precision_sampling_three_by_three() {
    let qd = DMatrix::from_row_slice(3, 3, &[3.0, -1.0, 0.5, -1.0, 2.0, 0.0, 0.5, 0.0, 1.5]);
    let f = CholeskyFactor::factorize(&from_na(&qd)).unwrap();
    let h = [0.3, -1.0, 2.0];
    let cov_t = qd.clone().try_inverse().unwrap();
    let mean_t = &cov_t * DVector::from_row_slice(&h);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws: Vec<Vec<f64>> = (0..100_000)
        .map(|_| f.sample_gaussian_precision(&h, &mut rng).unwrap())
        .collect();
    let (mean, cov) = moments(&draws);
    let tc: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| cov_t[(i, j)]).collect()).collect();
    assert_gaussian_moments(&mean, &cov, mean_t.as_slice(), &tc, 100_000.0, 3.0);
}

#[test]
fn identity_precision_gives_standard_normal() {
    let f = CholeskyFactor::factorize(&SparseMatrix::identity(3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let draws: Vec<Vec<f64>> = (0..100_000)
        .map(|_| f.sample_gaussian_precision(&[0.0; 3], &mut rng).unwrap())
        .collect();
    let (mean, cov) = moments(&draws);
    let eye: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| f64::from(i == j)).collect()).collect();
    assert_gaussian_moments(&mean, &cov, &[0.0; 3], &eye, 100_000.0, 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn factor_reconstructs(n in 1usize..200, density in 0.0f64..0.08, seed in any::<u64>()) {
        let m = random_spd(n, density, seed);
        prop_assert!(reconstruction_error(&m) < 1e-10);
    }

    #[test]
    fn log_det_matches_dense(n in 1usize..50, density in 0.0f64..0.3, seed in any::<u64>()) {
        let m = random_spd(n, density, seed);
        let dense = to_na(&m).cholesky().unwrap().determinant().ln();
        let f = CholeskyFactor::factorize(&m).unwrap();
        prop_assert!((f.log_det() - dense).abs() < 1e-8);
    }
}
