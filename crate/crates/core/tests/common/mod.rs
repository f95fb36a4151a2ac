#![allow(dead_code)]

use lmafield::sparse::SparseMatrix;
use nalgebra::{DMatrix, DVector};

pub fn to_na(m: &SparseMatrix) -> DMatrix<f64> {
    let d = m.to_dense();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| d[i][j])
}

pub fn from_na(m: &DMatrix<f64>) -> SparseMatrix {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect();
    SparseMatrix::from_dense(&rows).unwrap()
}

/// Sample mean vector and covariance matrix of row draws.
pub fn moments(draws: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = draws.len() as f64;
    let d = draws[0].len();
    let mut mean = vec![0.0; d];
    for x in draws {
        for i in 0..d {
            mean[i] += x[i] / n;
        }
    }
    let mut cov = vec![vec![0.0; d]; d];
    for x in draws {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (x[i] - mean[i]) * (x[j] - mean[j]) / (n - 1.0);
            }
        }
    }
    (mean, cov)
}

/// Checks sample moments against a Gaussian target within `k` Monte-Carlo
/// standard errors. `ess` is the effective number of independent draws.
pub fn assert_gaussian_moments(
    mean: &[f64],
    cov: &[Vec<f64>],
    target_mean: &[f64],
    target_cov: &[Vec<f64>],
    ess: f64,
    k: f64,
) {
    let d = mean.len();
    for i in 0..d {
        let se = (target_cov[i][i] / ess).sqrt();
        assert!(
            (mean[i] - target_mean[i]).abs() < k * se,
            "mean[{i}] = {} vs {} (se {se})",
            mean[i],
            target_mean[i]
        );
        for j in 0..d {
            let se = ((target_cov[i][i] * target_cov[j][j] + target_cov[i][j].powi(2)) / ess).sqrt();
            assert!(
                (cov[i][j] - target_cov[i][j]).abs() < k * se,
                "cov[{i}][{j}] = {} vs {} (se {se})",
                cov[i][j],
                target_cov[i][j]
            );
        }
    }
}

pub fn path_graph_edges(n: usize) -> Vec<(usize, usize)> {
    (0..n - 1).map(|i| (i, i + 1)).collect()
}

/// Regular `nx × ny` grid on `[0, nx−1] × [0, ny−1]` with interior nodes
/// jittered by up to `jitter` in each coordinate, split into triangles along
/// alternating diagonals.
pub fn jittered_grid(nx: usize, ny: usize, jitter: f64, seed: u64) -> lmafield::fem::Mesh {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let interior = i > 0 && j > 0 && i + 1 < nx && j + 1 < ny;
            let (dx, dy) = if interior {
                (rng.random_range(-jitter..jitter), rng.random_range(-jitter..jitter))
            } else {
                (0.0, 0.0)
            };
            nodes.push([i as f64 + dx, j as f64 + dy]);
        }
    }
    let id = |i: usize, j: usize| j * nx + i;
    let mut tris = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            if (i + j) % 2 == 0 {
                tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            } else {
                tris.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                tris.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    lmafield::fem::Mesh::new(nodes, tris).unwrap()
}

/// Unit square with a centre node: 5 nodes, 4 triangles.
pub fn five_node_mesh() -> lmafield::fem::Mesh {
    lmafield::fem::Mesh::new(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.45, 0.55]],
        vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
    )
    .unwrap()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

pub fn data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn columbus_graph() -> lmafield::graph::GraphSupport {
    lmafield::graph::GraphSupport::read(&data_dir().join("columbus/columbus_edges.txt"), Some(49)).unwrap()
}

pub fn path_graph(n: usize) -> lmafield::graph::GraphSupport {
    lmafield::graph::GraphSupport::new(n, &path_graph_edges(n)).unwrap()
}

pub fn cycle_graph(n: usize) -> lmafield::graph::GraphSupport {
    let mut e = path_graph_edges(n);
    e.push((0, n - 1));
    lmafield::graph::GraphSupport::new(n, &e).unwrap()
}

pub fn grid_graph(nx: usize, ny: usize) -> lmafield::graph::GraphSupport {
    let mut e = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let v = j * nx + i;
            if i + 1 < nx {
                e.push((v, v + 1));
            }
            if j + 1 < ny {
                e.push((v, v + nx));
            }
        }
    }
    lmafield::graph::GraphSupport::new(nx * ny, &e).unwrap()
}

fn simpson_step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature on a finite interval. `tol` is relative to a
/// coarse composite-rule estimate of the integral.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let f = &f as &dyn Fn(f64) -> f64;
    let panels = 512;
    let h = (b - a) / panels as f64;
    let coarse: f64 = (0..panels)
        .map(|i| {
            let x0 = a + i as f64 * h;
            h / 6.0 * (f(x0) + 4.0 * f(x0 + h / 2.0) + f(x0 + h))
        })
        .sum();
    let abs_tol = tol * coarse.abs().max(1e-300) / panels as f64;
    (0..panels)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fb, fm) = (f(x0), f(x1), f(0.5 * (x0 + x1)));
            let whole = h / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(f, x0, x1, fa, fm, fb, whole, abs_tol, 30)
        })
        .sum()
}

/// Integral over `(0, ∞)` through `x = t/(1−t)`, split at `x = 1` so the
/// map stays well resolved near the origin.
pub fn integrate_positive(f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let g = |t: f64| {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        let x = t / (1.0 - t);
        let v = f(x) / ((1.0 - t) * (1.0 - t));
        if v.is_finite() { v } else { 0.0 }
    };
    integrate(&g, 0.0, 0.5, tol) + integrate(&g, 0.5, 1.0, tol)
}

/// Integral over the real line as two half-lines.
pub fn integrate_real(f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    integrate_positive(|x| f(x), tol) + integrate_positive(|x| f(-x), tol)
}

/// Five Gaussian records on a 4-node cycle (node 2 observed twice) with
/// every hyperparameter fixed, so `(β, η)` is jointly Gaussian.
pub fn four_node_gaussian() -> (lmafield::models::ModelSpec, lmafield::models::Dataset) {
    use lmafield::models::{Dataset, Family, Hyperparameter, Locations, ModelSpec, SpatialSupport};
    let spec = ModelSpec::new(
        Family::Gaussian,
        SpatialSupport::Graph { graph: cycle_graph(4), k: 1 },
        lmafield::PriorKind::Grf,
    )
    .with_fixed(Hyperparameter::Kappa2, 0.5)
    .with_fixed(Hyperparameter::Xi2, 1.5)
    .with_fixed(Hyperparameter::Sigma2, 0.4);
    let data = Dataset {
        y: vec![1.2, -0.3, 0.8, 1.1, 2.0],
        x: vec![vec![1.0, 0.5], vec![1.0, -1.0], vec![1.0, 0.2], vec![1.0, 0.9], vec![1.0, 1.5]],
        covariates: vec!["intercept".into(), "x".into()],
        locations: Locations::Nodes(vec![0, 1, 2, 2, 3]),
        offset: None,
    };
    (spec, data)
}

/// Dense posterior `(mean, covariance)` of `(β, η)` for a Gaussian model on
/// a graph with fixed `κ²`, `ξ²`, `σ²` and GRF order `k`.
pub fn dense_gaussian_posterior(
    spec: &lmafield::models::ModelSpec,
    data: &lmafield::models::Dataset,
) -> (DVector<f64>, DMatrix<f64>) {
    use lmafield::models::{Hyperparameter, Locations, SpatialSupport};
    let SpatialSupport::Graph { graph, k } = &spec.support else { panic!("graph support expected") };
    let Locations::Nodes(nodes) = &data.locations else { panic!("node locations expected") };
    let (kappa2, xi2, sigma2) = (
        spec.fixed[&Hyperparameter::Kappa2],
        spec.fixed[&Hyperparameter::Xi2],
        spec.fixed[&Hyperparameter::Sigma2],
    );
    let n = graph.n_nodes();
    let p = data.n_covariates();
    let l = to_na(&lmafield::graph::graph_laplacian(graph)) + DMatrix::identity(n, n) * kappa2;
    let q = (0..=*k).fold(DMatrix::identity(n, n), |acc, _| acc * &l) / xi2;
    let m = data.n_obs();
    let mut design = DMatrix::zeros(m, p + n);
    for r in 0..m {
        for j in 0..p {
            design[(r, j)] = data.x[r][j];
        }
        design[(r, p + nodes[r])] = 1.0;
    }
    let mut prior = DMatrix::zeros(p + n, p + n);
    for j in 0..p {
        prior[(j, j)] = 1.0 / spec.beta_variance;
    }
    prior.view_mut((p, p), (n, n)).copy_from(&q);
    let prec = prior + design.transpose() * &design / sigma2;
    let cov = prec.try_inverse().unwrap();
    let mean = &cov * design.transpose() * DVector::from_vec(data.y.clone()) / sigma2;
    (mean, cov)
}

pub fn dmat_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn mesh_fixtures() -> Vec<(&'static str, lmafield::fem::Mesh)> {
    vec![
        ("five", five_node_mesh()),
        ("ten", jittered_grid(5, 2, 0.0, 0)),
        ("twenty", jittered_grid(5, 4, 0.3, 17)),
    ]
}

/// Element matrices by 3-point (edge midpoint) quadrature, with basis
/// functions obtained by inverting the vertex interpolation system.
pub fn quadrature_oracle(mesh: &lmafield::fem::Mesh) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = mesh.n_nodes();
    let mut mass = DMatrix::zeros(n, n);
    let mut stiff = DMatrix::zeros(n, n);
    for tri in mesh.triangles() {
        let p = tri.map(|i| mesh.nodes()[i]);
        // φ_a(x, y) = c0 + c1 x + c2 y, with φ_a(p_b) = δ_ab
        let v = nalgebra::Matrix3::from_fn(|r, c| match c {
            0 => 1.0,
            1 => p[r][0],
            _ => p[r][1],
        });
        let coef = v.try_inverse().unwrap();
        let area = 0.5 * v.determinant().abs();
        let phi = |a: usize, x: f64, y: f64| coef.column(a).dot(&nalgebra::Vector3::new(1.0, x, y));
        let mids = [
            [(p[0][0] + p[1][0]) / 2.0, (p[0][1] + p[1][1]) / 2.0],
            [(p[1][0] + p[2][0]) / 2.0, (p[1][1] + p[2][1]) / 2.0],
            [(p[2][0] + p[0][0]) / 2.0, (p[2][1] + p[0][1]) / 2.0],
        ];
        for a in 0..3 {
            for b in 0..3 {
                let m: f64 = mids.iter().map(|q| phi(a, q[0], q[1]) * phi(b, q[0], q[1])).sum::<f64>() * area / 3.0;
                let g: f64 = mids
                    .iter()
                    .map(|_| coef[(1, a)] * coef[(1, b)] + coef[(2, a)] * coef[(2, b)])
                    .sum::<f64>()
                    * area
                    / 3.0;
                mass[(tri[a], tri[b])] += m;
                stiff[(tri[a], tri[b])] += g;
            }
        }
    }
    (mass, stiff)
}

pub fn shoelace_area(mesh: &lmafield::fem::Mesh) -> f64 {
    mesh.triangles()
        .iter()
        .map(|t| {
            let p = t.map(|i| mesh.nodes()[i]);
            let s: f64 = (0..3).map(|k| p[k][0] * p[(k + 1) % 3][1] - p[(k + 1) % 3][0] * p[k][1]).sum();
            0.5 * s.abs()
        })
        .sum()
}

pub fn dense_grf(c: &DMatrix<f64>, g: &DMatrix<f64>, kappa: f64, alpha: u32) -> DMatrix<f64> {
    let l = c * kappa * kappa + g;
    let ci = c.clone().try_inverse().unwrap();
    let mut q = if alpha % 2 == 1 { l.clone() } else { &l * &ci * &l };
    for _ in 0..(alpha - 1) / 2 {
        q = &l * &ci * q * &ci * &l;
    }
    q
}

/// Mean of GIG(p, a, b) from quadrature of the unnormalized density.
pub fn gig_mean_by_quadrature(p: lmafield::distributions::GigParams) -> f64 {
    // shift the log kernel by its maximum for stability
    let grid_max = (1..4000)
        .map(|i| p.log_kernel(10f64.powf(-6.0 + 12.0 * i as f64 / 4000.0)))
        .fold(f64::NEG_INFINITY, f64::max);
    let k = |x: f64| (p.log_kernel(x) - grid_max).exp();
    let z = integrate_positive(k, 1e-11);
    let m1 = integrate_positive(|x| x * k(x), 1e-11);
    m1 / z
}
