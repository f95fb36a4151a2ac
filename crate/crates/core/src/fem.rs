//! Piecewise-linear finite elements on triangular meshes for the Matérn
//! SPDE `(κ² − Δ)^{α/2} η = ξ W` in two dimensions.
//!
//! The mesh is read from a file rather than generated. Only natural
//! (Neumann) boundary conditions are implied by the stiffness matrix, so
//! meshes should extend some distance past the data to keep boundary
//! inflation of the variance away from observed locations.

use std::path::Path;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use crate::PriorKind;

/// Triangles with area below this are rejected as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-14;

/// Barycentric tolerance for point location.
pub const LOCATE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
}

impl Mesh {
    /// Validates node indices and derives boundary flags (nodes on an edge
    /// that belongs to a single triangle).
    pub fn new(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if nodes.is_empty() || triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh needs nodes and triangles".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= nodes.len()) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references node {bad} but there are {} nodes",
                    nodes.len()
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a node")));
            }
        }
        if let Some((i, p)) = nodes.iter().enumerate().find(|(_, p)| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidMesh(format!("node {i} has non-finite coordinates {p:?}")));
        }
        let mut edges: Vec<(usize, usize)> = triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        let mut boundary = vec![false; nodes.len()];
        let mut k = 0;
        while k < edges.len() {
            let mut r = k + 1;
            while r < edges.len() && edges[r] == edges[k] {
                r += 1;
            }
            if r - k == 1 {
                boundary[edges[k].0] = true;
                boundary[edges[k].1] = true;
            }
            k = r;
        }
        Ok(Self {
            nodes,
            triangles,
            boundary,
        })
    }

    /// Parses the text format: a header `nodes <n> triangles <m>`, then `n`
    /// lines `x y`, then `m` lines `i j k` with 0-based node indices.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {line}: {message}"),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or_else(|| err(1, "empty mesh file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let (n, m) = match h.as_slice() {
            ["nodes", n, "triangles", m] => (
                n.parse::<usize>().map_err(|_| err(hline, format!("bad node count `{n}`")))?,
                m.parse::<usize>().map_err(|_| err(hline, format!("bad triangle count `{m}`")))?,
            ),
            _ => {
                return Err(err(
                    hline,
                    format!("expected `nodes <n> triangles <m>`, found `{header}`"),
                ))
            }
        };
        let mut nodes = Vec::with_capacity(n);
        let mut triangles = Vec::with_capacity(m);
        for _ in 0..n {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| err(hline, format!("expected {n} node lines")))?;
            let v: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(ln, format!("bad coordinates `{l}`")))?;
            if v.len() != 2 {
                return Err(err(ln, format!("expected `x y`, found `{l}`")));
            }
            nodes.push([v[0], v[1]]);
        }
        for _ in 0..m {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| err(hline, format!("expected {m} triangle lines")))?;
            let v: Vec<usize> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(ln, format!("bad triangle `{l}`")))?;
            if v.len() != 3 {
                return Err(err(ln, format!("expected `i j k`, found `{l}`")));
            }
            triangles.push([v[0], v[1], v[2]]);
        }
        if let Some((ln, l)) = lines.next() {
            return Err(err(ln, format!("unexpected trailing content `{l}`")));
        }
        Self::new(nodes, triangles).map_err(|e| match e {
            Error::InvalidMesh(msg) => Error::Parse {
                path: path.to_path_buf(),
                message: msg,
            },
            other => other,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    /// Signed area of triangle `t` (positive for counter-clockwise order).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Total area, failing on degenerate triangles.
    pub fn area(&self) -> Result<f64> {
        (0..self.n_triangles()).map(|t| self.checked_area(t)).sum()
    }

    fn checked_area(&self, t: usize) -> Result<f64> {
        let area = self.signed_area(t).abs();
        if !(area >= MIN_TRIANGLE_AREA) {
            return Err(Error::DegenerateTriangle { triangle: t, area });
        }
        Ok(area)
    }

    /// Gradients of the three hat functions on triangle `t` (constant on the
    /// element) together with its area.
    fn gradients(&self, t: usize) -> Result<([[f64; 2]; 3], f64)> {
        let area = self.checked_area(t)?;
        let s = self.signed_area(t);
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        let grad = |p: [f64; 2], q: [f64; 2]| [(p[1] - q[1]) / (2.0 * s), (q[0] - p[0]) / (2.0 * s)];
        Ok(([grad(b, c), grad(c, a), grad(a, b)], area))
    }

    /// Barycentric coordinates of `p` in triangle `t`.
    fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        let det = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
        let l0 = ((b[1] - c[1]) * (p[0] - c[0]) + (c[0] - b[0]) * (p[1] - c[1])) / det;
        let l1 = ((c[1] - a[1]) * (p[0] - c[0]) + (a[0] - c[0]) * (p[1] - c[1])) / det;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// Lowest-index triangle containing `p` and the barycentric weights.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        (0..self.n_triangles()).find_map(|t| {
            let mut w = self.barycentric(t, p);
            if w.iter().all(|&v| v >= -LOCATE_TOLERANCE) {
                for v in w.iter_mut() {
                    if v.abs() <= LOCATE_TOLERANCE {
                        *v = 0.0;
                    }
                }
                let s: f64 = w.iter().sum();
                Some((t, w.map(|v| v / s)))
            } else {
                None
            }
        })
    }
}

/// Lumped mass matrix `C_ii = Σ area(T)/3` over triangles touching node `i`.
pub fn assemble_mass_lumped(mesh: &Mesh) -> Result<SparseMatrix> {
    let mut c = vec![0.0; mesh.n_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.checked_area(t)?;
        for &i in tri {
            c[i] += area / 3.0;
        }
    }
    if let Some(i) = c.iter().position(|&v| v <= 0.0) {
        return Err(Error::InvalidMesh(format!("node {i} belongs to no triangle")));
    }
    Ok(SparseMatrix::diagonal(&c))
}

/// Stiffness matrix `G_ij = ∫ ∇φ_i · ∇φ_j`.
pub fn assemble_stiffness(mesh: &Mesh) -> Result<SparseMatrix> {
    let n = mesh.n_nodes();
    let mut t = Vec::with_capacity(9 * mesh.n_triangles());
    for (e, tri) in mesh.triangles().iter().enumerate() {
        let (grad, area) = mesh.gradients(e)?;
        for a in 0..3 {
            for b in 0..3 {
                let v = area * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]);
                t.push((tri[a], tri[b], v));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t)?.symmetrize()
}

/// Projection matrix with `A_ij = φ_j(u_i)` for the given locations.
pub fn assemble_projection(mesh: &Mesh, locations: &[[f64; 2]]) -> Result<SparseMatrix> {
    let mut t = Vec::with_capacity(3 * locations.len());
    for (i, &p) in locations.iter().enumerate() {
        let (tri, w) = mesh.locate(p).ok_or(Error::LocationOutsideMesh {
            index: i,
            x: p[0],
            y: p[1],
        })?;
        for (k, &node) in mesh.triangles()[tri].iter().enumerate() {
            t.push((i, node, w[k]));
        }
    }
    SparseMatrix::from_triplets(locations.len(), mesh.n_nodes(), &t)
}

fn mass_diagonal(c: &SparseMatrix) -> Result<Vec<f64>> {
    if !c.is_square() || c.nnz() != c.nrows() {
        return Err(Error::DimensionMismatch("C must be a diagonal matrix".into()));
    }
    let d = c.diag();
    if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::ZeroDiagonal(i));
    }
    Ok(d)
}

/// `L = κ²C + G`.
pub fn operator_l(c: &SparseMatrix, g: &SparseMatrix, kappa: f64) -> Result<SparseMatrix> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::NonPositiveKappa(kappa));
    }
    c.add_scaled(kappa * kappa, g, 1.0)?.symmetrize()
}

/// GRF precision: `Q₁ = L`, `Q₂ = LC⁻¹L`, `Q_α = LC⁻¹Q_{α−2}C⁻¹L`.
pub fn grf_precision(c: &SparseMatrix, g: &SparseMatrix, kappa: f64, alpha: u32) -> Result<SparseMatrix> {
    if alpha == 0 {
        return Err(Error::InvalidParams("alpha must be at least 1".into()));
    }
    let cinv: Vec<f64> = mass_diagonal(c)?.iter().map(|v| 1.0 / v).collect();
    let l = operator_l(c, g, kappa)?;
    let lc = l.scale_cols(&cinv);
    let mut q = if alpha % 2 == 1 {
        l.clone()
    } else {
        lc.matmul(&l)?
    };
    for _ in 0..(alpha - 1) / 2 {
        q = lc.matmul(&q)?.matmul(&lc.transpose())?;
    }
    q.symmetrize()
}

/// `log det Q_α = α log det L − (α − 1) log det C`.
pub fn grf_log_det(log_det_l: f64, log_det_c: f64, alpha: u32) -> f64 {
    alpha as f64 * log_det_l - (alpha as f64 - 1.0) * log_det_c
}

/// LMA operator: `K₂ = L`, `K_α = LC⁻¹K_{α−2}`. Only even `α` is defined.
pub fn lma_operator(c: &SparseMatrix, g: &SparseMatrix, kappa: f64, alpha: u32) -> Result<SparseMatrix> {
    if alpha == 0 || alpha % 2 == 1 {
        return Err(Error::OddAlphaUnsupported(alpha));
    }
    let cinv: Vec<f64> = mass_diagonal(c)?.iter().map(|v| 1.0 / v).collect();
    let l = operator_l(c, g, kappa)?;
    let lc = l.scale_cols(&cinv);
    let mut k = l;
    for _ in 1..alpha / 2 {
        k = lc.matmul(&k)?;
    }
    k.symmetrize()
}

/// `log |det K_α| = (α/2) log det L − (α/2 − 1) log det C`.
pub fn lma_log_det(log_det_l: f64, log_det_c: f64, alpha: u32) -> f64 {
    let h = (alpha / 2) as f64;
    h * log_det_l - (h - 1.0) * log_det_c
}

/// SPDE order in two dimensions; `ν = α − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpdeOrder {
    alpha: u32,
    prior: PriorKind,
}

impl SpdeOrder {
    pub fn new(alpha: u32, prior: PriorKind) -> Result<Self> {
        if prior == PriorKind::Lma && alpha % 2 == 1 {
            return Err(Error::OddAlphaUnsupported(alpha));
        }
        if alpha < 2 {
            return Err(Error::InvalidParams(format!(
                "alpha = {alpha} gives smoothness nu = {} in two dimensions; need alpha >= 2",
                alpha as i64 - 1
            )));
        }
        Ok(Self { alpha, prior })
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn nu(&self) -> f64 {
        self.alpha as f64 - 1.0
    }

    pub fn prior(&self) -> PriorKind {
        self.prior
    }
}

/// Marginal variance `φ²` and effective range `ρ` of the Matérn field in `d`
/// dimensions.
pub fn matern_derived(xi: f64, kappa: f64, nu: f64, d: u32) -> (f64, f64) {
    let alpha = nu + d as f64 / 2.0;
    let phi2 = xi * xi * gamma(nu)
        / (gamma(alpha) * (4.0 * std::f64::consts::PI).powf(d as f64 / 2.0) * kappa.powf(2.0 * nu));
    let rho = (8.0 * nu).sqrt() / kappa;
    (phi2, rho)
}

/// Assembled FEM matrices for one mesh, with `C` kept as its diagonal.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    pub c: Vec<f64>,
    pub g: SparseMatrix,
}

impl FemMatrices {
    pub fn assemble(mesh: &Mesh) -> Result<Self> {
        Ok(Self {
            c: assemble_mass_lumped(mesh)?.diag(),
            g: assemble_stiffness(mesh)?,
        })
    }

    pub fn c_matrix(&self) -> SparseMatrix {
        SparseMatrix::diagonal(&self.c)
    }

    pub fn log_det_c(&self) -> f64 {
        self.c.iter().map(|v| v.ln()).sum()
    }
}
