mod common;

use common::{
    assert_gaussian_moments, dense_grf, five_node_mesh, jittered_grid, max_abs_diff, mesh_fixtures, moments,
    quadrature_oracle, shoelace_area, to_na,
};
use lmafield::fem::{
    assemble_mass_lumped, assemble_stiffness, grf_log_det, grf_precision, lma_log_det,
    lma_operator, operator_l,
};
use lmafield::sparse::{CholeskyFactor, SparseMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn assemblies_match_quadrature() {
    for (name, mesh) in mesh_fixtures() {
        let (mass, stiff) = quadrature_oracle(&mesh);
        let c = assemble_mass_lumped(&mesh).unwrap().diag();
        let g = to_na(&assemble_stiffness(&mesh).unwrap());
        assert!(max_abs_diff(&g, &stiff) < 1e-12, "{name}: stiffness");
        for i in 0..mesh.n_nodes() {
            let lumped: f64 = mass.row(i).sum();
            assert!((c[i] - lumped).abs() < 1e-12, "{name}: mass row {i}");
            assert!(c[i] > 0.0);
        }
        assert!((c.iter().sum::<f64>() - shoelace_area(&mesh)).abs() < 1e-12, "{name}: area");
        assert!((mesh.area().unwrap() - shoelace_area(&mesh)).abs() < 1e-12);
    }
}

#[test]
fn stiffness_kills_constants_and_is_symmetric() {
    for (name, mesh) in mesh_fixtures() {
        let g = assemble_stiffness(&mesh).unwrap();
        assert!(g.is_symmetric());
        let r = g.mul_vec(&vec![1.0; mesh.n_nodes()]);
        assert!(r.iter().all(|v| v.abs() < 1e-12), "{name}: {r:?}");
        let gd = to_na(&g);
        assert_eq!(gd, gd.transpose());
        // nonzeros only on mesh edges and the diagonal
        for (i, j, _) in g.triplets() {
            let on_edge = i == j || mesh.triangles().iter().any(|t| t.contains(&i) && t.contains(&j));
            assert!(on_edge, "{name}: ({i}, {j})");
        }
    }
}

#[test]
fn grf_precision_matches_dense_products() {
    for (name, mesh) in mesh_fixtures() {
        let c = assemble_mass_lumped(&mesh).unwrap();
        let g = assemble_stiffness(&mesh).unwrap();
        let (cd, gd) = (to_na(&c), to_na(&g));
        for alpha in 1..=3 {
            for kappa in [0.3, 1.0, 2.5] {
                let q = grf_precision(&c, &g, kappa, alpha).unwrap();
                assert!(q.is_symmetric());
                let oracle = dense_grf(&cd, &gd, kappa, alpha);
                let rel = (to_na(&q) - &oracle).norm() / oracle.norm();
                assert!(rel < 1e-10, "{name} alpha={alpha} kappa={kappa}: {rel}");
                // log-det identity against the dense determinant
                let f = CholeskyFactor::factorize(&q).unwrap();
                let lf = CholeskyFactor::factorize(&operator_l(&c, &g, kappa).unwrap()).unwrap();
                let ld = grf_log_det(lf.log_det(), c.diag().iter().map(|v| v.ln()).sum(), alpha);
                assert!((f.log_det() - ld).abs() < 1e-8 * ld.abs().max(1.0));
                let dense_ld = oracle.cholesky().unwrap().determinant().ln();
                assert!((ld - dense_ld).abs() < 1e-8 * dense_ld.abs().max(1.0), "{name}");
            }
        }
    }
}

#[test]
fn lma_log_det_identity() {
    let mesh = jittered_grid(5, 4, 0.3, 17);
    let c = assemble_mass_lumped(&mesh).unwrap();
    let g = assemble_stiffness(&mesh).unwrap();
    for alpha in [2, 4] {
        let k = to_na(&lma_operator(&c, &g, 0.8, alpha).unwrap());
        let lf = CholeskyFactor::factorize(&operator_l(&c, &g, 0.8).unwrap()).unwrap();
        let ld = lma_log_det(lf.log_det(), c.diag().iter().map(|v| v.ln()).sum(), alpha);
        let dense = k.determinant().abs().ln();
        assert!((ld - dense).abs() < 1e-8 * dense.abs().max(1.0));
    }
}

#[test]
fn lma_with_unit_gamma_matches_grf_when_mass_is_identity() {
    let mesh = five_node_mesh();
    let g = assemble_stiffness(&mesh).unwrap();
    let eye = SparseMatrix::identity(5);
    let k = lma_operator(&eye, &g, 1.3, 2).unwrap();
    let q_lma = k.gram(None).unwrap();
    let q_grf = grf_precision(&eye, &g, 1.3, 2).unwrap();
    assert!(max_abs_diff(&to_na(&q_lma), &to_na(&q_grf)) < 1e-12);
}

#[test]
fn grf_samples_have_dense_covariance() {
    let mesh = five_node_mesh();
    let c = assemble_mass_lumped(&mesh).unwrap();
    let g = assemble_stiffness(&mesh).unwrap();
    let xi = 0.7;
    let q = grf_precision(&c, &g, 1.5, 2).unwrap().scale(1.0 / (xi * xi));
    let f = CholeskyFactor::factorize(&q).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws: Vec<Vec<f64>> = (0..100_000).map(|_| f.sample_zero_mean(&mut rng)).collect();
    let (mean, cov) = moments(&draws);
    let inv = to_na(&q).try_inverse().unwrap();
    let target: Vec<Vec<f64>> = (0..5).map(|i| (0..5).map(|j| inv[(i, j)]).collect()).collect();
    assert_gaussian_moments(&mean, &cov, &[0.0; 5], &target, 100_000.0, 3.0);
}

#[test]
fn lma_with_equal_gamma_matches_grf_covariance() {
    // t = K w | Γ ~ N(0, γ I) with C = I gives Cov(w) = γ (K K)⁻¹ = γ Q₂⁻¹.
    let mesh = five_node_mesh();
    let g = assemble_stiffness(&mesh).unwrap();
    let eye = SparseMatrix::identity(5);
    let gamma = 0.6;
    let k = lma_operator(&eye, &g, 1.0, 2).unwrap();
    let prec = k.gram(Some(&[1.0 / gamma; 5])).unwrap();
    let grf = grf_precision(&eye, &g, 1.0, 2).unwrap().scale(1.0 / gamma);
    let a = to_na(&prec).try_inverse().unwrap();
    let b = to_na(&grf).try_inverse().unwrap();
    assert!(max_abs_diff(&a, &b) < 1e-10);
}
