//! Areal (graph) support: graph Laplacian, order-k difference operators and
//! the CAR conditional form of a precision matrix.
//!
//! With `L = κ²I + A`, the difference operator is `Δ = L^{(k+1)/2}` for odd
//! `k` and `Δ = D L^{k/2}` for even `k`, where `D` is the upper Cholesky
//! factor of `L` in natural order. Either way `ΔᵀΔ = L^{k+1}`.
//!
//! Note that `κ² = 1, k = 0` gives precision `I + A`, not the ICAR precision
//! `A`; the intrinsic model is the `κ² → 0` limit, which needs a proper
//! handling of the null space and is not fitted here.
//!
//! The simultaneous autoregressive form `(I − B)η = ε` is the same object as
//! a GRF with `Δ = I − B`; it is not offered as a separate prior.

use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::sparse::{CholeskyFactor, Ordering, SparseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSupport {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbours: Vec<Vec<usize>>,
    labels: Option<Vec<String>>,
}

impl GraphSupport {
    /// Undirected graph on `n` nodes. Edges are stored with the smaller index
    /// first; self-loops and duplicates are rejected.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        let mut norm = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!("edge ({i}, {j}) outside {n} nodes")));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
            }
            norm.push((i.min(j), i.max(j)));
        }
        let mut sorted = norm.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!("duplicate edge ({}, {})", w[0].0, w[0].1)));
        }
        let mut neighbours = vec![Vec::new(); n];
        for &(i, j) in &norm {
            neighbours[i].push(j);
            neighbours[j].push(i);
        }
        for nb in neighbours.iter_mut() {
            nb.sort_unstable();
        }
        let g = Self {
            n,
            edges: norm,
            neighbours,
            labels: None,
        };
        let c = g.n_components();
        if c > 1 {
            warn!("graph has {c} connected components; the precision is proper only for kappa2 > 0");
        }
        Ok(g)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidGraph(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Parses an edge list, one `i j` pair per line (0-based, each undirected
    /// pair once). `#` starts a comment. When `n` is `None` the node count is
    /// one more than the largest index.
    pub fn parse(text: &str, n: Option<usize>, path: &Path) -> Result<Self> {
        let mut edges = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let v: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
            let parsed = match v.as_slice() {
                [a, b] => a.parse::<usize>().ok().zip(b.parse::<usize>().ok()),
                _ => None,
            };
            let (i, j) = parsed.ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: expected `i j`, found `{line}`", ln + 1),
            })?;
            edges.push((i, j));
        }
        let n = n.unwrap_or_else(|| edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0));
        Self::new(n, &edges).map_err(|e| match e {
            Error::InvalidGraph(message) => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn read(path: &Path, n: Option<usize>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, n, path)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.neighbours[i]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn n_components(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &u in &self.neighbours[v] {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        count
    }

    /// Edge incidence matrix (one row per edge, `+1` at the smaller index and
    /// `−1` at the larger).
    pub fn incidence(&self) -> SparseMatrix {
        let t: Vec<_> = self
            .edges
            .iter()
            .enumerate()
            .flat_map(|(e, &(i, j))| [(e, i, 1.0), (e, j, -1.0)])
            .collect();
        SparseMatrix::from_triplets(self.edges.len(), self.n, &t).expect("indices checked")
    }
}

/// Graph Laplacian: degree on the diagonal, `−1` between neighbours.
pub fn graph_laplacian(g: &GraphSupport) -> SparseMatrix {
    let mut t = Vec::with_capacity(g.n + 2 * g.edges.len());
    for i in 0..g.n {
        t.push((i, i, g.neighbours[i].len() as f64));
    }
    for &(i, j) in &g.edges {
        t.push((i, j, -1.0));
        t.push((j, i, -1.0));
    }
    let mut m = SparseMatrix::from_triplets(g.n, g.n, &t).expect("indices checked");
    m.set_symmetric_flag(true);
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

/// `Δ^(k)` for `L = κ²I + A`.
#[derive(Debug, Clone)]
pub struct DifferenceOperator {
    k: u32,
    kappa2: f64,
    matrix: SparseMatrix,
    l: SparseMatrix,
}

impl DifferenceOperator {
    pub fn new(a: &SparseMatrix, kappa2: f64, k: u32) -> Result<Self> {
        if !(kappa2 >= 0.0) || !kappa2.is_finite() {
            return Err(Error::InvalidParams(format!("kappa2 must be non-negative, got {kappa2}")));
        }
        let l = laplacian_operator(a, kappa2)?;
        let mut matrix = if k % 2 == 1 {
            l.clone()
        } else {
            let f = CholeskyFactor::factorize_with(&l, Ordering::Natural)?;
            f.factor_matrix().transpose()
        };
        let extra = if k % 2 == 1 { (k + 1) / 2 - 1 } else { k / 2 };
        for _ in 0..extra {
            matrix = matrix.matmul(&l)?;
        }
        if k % 2 == 1 {
            matrix = matrix.symmetrize()?;
        }
        Ok(Self {
            k,
            kappa2,
            matrix,
            l,
        })
    }

    pub fn order(&self) -> u32 {
        self.k
    }

    pub fn kappa2(&self) -> f64 {
        self.kappa2
    }

    pub fn parity(&self) -> Parity {
        if self.k % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn l(&self) -> &SparseMatrix {
        &self.l
    }

    /// `Q_k = L^{k+1}`, computed as a power of `L` so that it is exactly
    /// symmetric.
    pub fn precision(&self) -> Result<SparseMatrix> {
        let mut q = self.l.clone();
        for _ in 0..self.k {
            q = q.matmul(&self.l)?;
        }
        q.symmetrize()
    }
}

/// `L = κ²I + A`.
pub fn laplacian_operator(a: &SparseMatrix, kappa2: f64) -> Result<SparseMatrix> {
    let n = a.nrows();
    let l = SparseMatrix::identity(n).add_scaled(kappa2, a, 1.0)?;
    l.check_symmetric()
}

pub fn difference_operator(a: &SparseMatrix, kappa2: f64, k: u32) -> Result<DifferenceOperator> {
    DifferenceOperator::new(a, kappa2, k)
}

/// Conditional form of a Gaussian precision `Q = M⁻¹(I − C)`:
/// `η_i | η_{−i} ~ N(Σ_j C_ij η_j, M_ii)`.
#[derive(Debug, Clone)]
pub struct CarDecomposition {
    pub c: SparseMatrix,
    pub m: Vec<f64>,
}

impl CarDecomposition {
    /// Conditional mean and variance of `η_i` given the rest.
    pub fn conditional(&self, i: usize, eta: &[f64]) -> (f64, f64) {
        let mean = self.c_row(i).map(|(j, v)| v * eta[j]).sum();
        (mean, self.m[i])
    }

    /// Entries of row `i` of `C`. `C` is stored transposed, so this is a
    /// column walk.
    fn c_row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.c.col(i)
    }
}

/// `M = diag(1/Q_ii)`, `C = M R` with `R = diag(Q) − Q`.
pub fn car_decompose(q: &SparseMatrix) -> Result<CarDecomposition> {
    if !q.is_square() {
        return Err(Error::DimensionMismatch("precision must be square".into()));
    }
    let d = q.diag();
    if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::ZeroDiagonal(i));
    }
    let m: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
    let t: Vec<_> = q
        .triplets()
        .filter(|&(i, j, _)| i != j)
        .map(|(i, j, v)| (i, j, -v * m[i]))
        .collect();
    let c = SparseMatrix::from_triplets(q.nrows(), q.ncols(), &t)?;
    // store Cᵀ so that rows of C are contiguous columns
    Ok(CarDecomposition { c: c.transpose(), m })
}

impl CarDecomposition {
    /// `C` in its natural orientation.
    pub fn c_matrix(&self) -> SparseMatrix {
        self.c.transpose()
    }
}

/// Minimizes `½‖y − β‖² + λ‖Dβ‖₁` by accelerated projected gradient on the
/// dual `min ½‖y − Dᵀu‖²` subject to `‖u‖∞ ≤ λ`, with `β = y − Dᵀu`.
pub fn l1_penalized_mode(y: &[f64], d: &SparseMatrix, lambda: f64, max_iter: usize) -> Result<Vec<f64>> {
    if d.ncols() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "operator has {} columns for {} observations",
            d.ncols(),
            y.len()
        )));
    }
    if lambda == 0.0 || d.nrows() == 0 {
        return Ok(y.to_vec());
    }
    // ‖D‖₂² ≤ ‖D‖₁ ‖D‖∞
    let col_max = (0..d.ncols())
        .map(|j| d.col(j).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut row_sums = vec![0.0; d.nrows()];
    for (i, _, v) in d.triplets() {
        row_sums[i] += v.abs();
    }
    let row_max = row_sums.iter().cloned().fold(0.0, f64::max);
    let step = 1.0 / (col_max * row_max).max(f64::MIN_POSITIVE);
    let m = d.nrows();
    let mut u = vec![0.0; m];
    let mut z = u.clone();
    let mut t: f64 = 1.0;
    let mut beta = y.to_vec();
    for _ in 0..max_iter {
        let dtz = d.tr_mul_vec(&z);
        let r: Vec<f64> = y.iter().zip(&dtz).map(|(a, b)| a - b).collect();
        let grad = d.mul_vec(&r);
        let u_next: Vec<f64> = z
            .iter()
            .zip(&grad)
            .map(|(zi, gi)| (zi + step * gi).clamp(-lambda, lambda))
            .collect();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        z = u_next
            .iter()
            .zip(&u)
            .map(|(a, b)| a + mom * (a - b))
            .collect();
        u = u_next;
        t = t_next;
        let dtu = d.tr_mul_vec(&u);
        let next: Vec<f64> = y.iter().zip(&dtu).map(|(a, b)| a - b).collect();
        let change = next
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        beta = next;
        if change < 1e-13 {
            return Ok(beta);
        }
    }
    Err(Error::ConvergenceFailure(max_iter))
}

/// GTF operator of order `k`: `Δ₁ = incidence`, then alternately `Δ₁ᵀ·`
/// and `Δ₁·` applied on the left.
pub fn gtf_operator(g: &GraphSupport, k: u32) -> Result<SparseMatrix> {
    let d1 = g.incidence();
    let mut d = d1.clone();
    for j in 1..=k {
        d = if j % 2 == 1 {
            d1.transpose().matmul(&d)?
        } else {
            d1.matmul(&d)?
        };
    }
    Ok(d)
}

/// Graph trend filtering estimate of order `k`:
/// `argmin ½‖y − β‖² + λ‖Δ^(k+1) β‖₁`. Intended for small graphs.
pub fn gtf_mode_check(g: &GraphSupport, y: &[f64], lambda: f64, k: u32) -> Result<Vec<f64>> {
    l1_penalized_mode(y, &gtf_operator(g, k)?, lambda, 2_000_000)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> GraphSupport {
        let e: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        GraphSupport::new(n, &e).unwrap()
    }

    #[test]
    fn path_laplacian() {
        let a = graph_laplacian(&path(3)).to_dense();
        assert_eq!(a, vec![vec![1.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 1.0]]);
    }

    #[test]
    fn single_node_laplacian() {
        let g = GraphSupport::new(1, &[]).unwrap();
        assert_eq!(graph_laplacian(&g).to_dense(), vec![vec![0.0]]);
    }

    #[test]
    fn invalid_graphs() {
        assert!(GraphSupport::new(3, &[(0, 0)]).is_err());
        assert!(GraphSupport::new(3, &[(0, 1), (1, 0)]).is_err());
        assert!(GraphSupport::new(2, &[(0, 2)]).is_err());
    }

    #[test]
    fn components() {
        let g = GraphSupport::new(5, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(g.n_components(), 3);
        assert_eq!(path(4).n_components(), 1);
    }

    #[test]
    fn parse_edge_list() {
        let g = GraphSupport::parse("0 1\n# c\n1 2\n\n", None, Path::new("e")).unwrap();
        assert_eq!(g.n_nodes(), 3);
        let e = GraphSupport::parse("0 1\n1 x\n", None, Path::new("e")).unwrap_err();
        assert!(e.to_string().contains("line 2"));
        assert!(GraphSupport::parse("0 1\n0 1\n", None, Path::new("e")).is_err());
    }

    #[test]
    fn odd_and_even_bases() {
        let a = graph_laplacian(&path(3));
        let d1 = DifferenceOperator::new(&a, 1.0, 1).unwrap();
        assert_eq!(d1.parity(), Parity::Odd);
        assert_eq!(d1.matrix().to_dense(), laplacian_operator(&a, 1.0).unwrap().to_dense());
        let d0 = DifferenceOperator::new(&a, 1.0, 0).unwrap();
        let q = d0.matrix().gram(None).unwrap().to_dense();
        let l = laplacian_operator(&a, 1.0).unwrap().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert!((q[i][j] - l[i][j]).abs() < 1e-14);
            }
        }
        // natural-order Cholesky factor is upper triangular
        assert!(d0.matrix().triplets().all(|(i, j, _)| i <= j));
    }

    #[test]
    fn even_order_needs_positive_kappa() {
        let a = graph_laplacian(&path(3));
        assert!(matches!(
            DifferenceOperator::new(&a, 0.0, 0),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(DifferenceOperator::new(&a, 0.0, 1).is_ok());
    }

    #[test]
    fn car_small_cases() {
        let car = car_decompose(&SparseMatrix::identity(3)).unwrap();
        assert_eq!(car.m, vec![1.0; 3]);
        assert_eq!(car.c.nnz(), 0);
        let q = SparseMatrix::from_dense(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        let car = car_decompose(&q).unwrap();
        assert_eq!(car.m, vec![0.5, 0.5]);
        assert_eq!(car.c_matrix().to_dense(), vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
        assert_eq!(car.conditional(0, &[0.0, 4.0]), (2.0, 0.5));
        let z = SparseMatrix::diagonal(&[1.0, 0.0]);
        assert!(matches!(car_decompose(&z), Err(Error::ZeroDiagonal(1))));
    }

    #[test]
    fn gtf_limits() {
        let g = path(5);
        let y = [1.0, 3.0, -2.0, 0.5, 4.0];
        assert_eq!(gtf_mode_check(&g, &y, 0.0, 0).unwrap(), y.to_vec());
        let fit = gtf_mode_check(&g, &y, 1e3, 0).unwrap();
        let mean = y.iter().sum::<f64>() / 5.0;
        assert!(fit.iter().all(|v| (v - mean).abs() < 1e-8), "{fit:?}");
    }

    #[test]
    fn gtf_first_order_operator_is_laplacian() {
        let g = path(4);
        assert_eq!(gtf_operator(&g, 1).unwrap().to_dense(), graph_laplacian(&g).to_dense());
    }
}
