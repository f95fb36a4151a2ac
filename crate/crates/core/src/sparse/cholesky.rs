use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{minimum_degree, SparseMatrix};
use crate::error::{Error, Result};

/// Pivots at or below this value are reported as not positive definite.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Row/column ordering applied before factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    #[default]
    MinimumDegree,
    /// Identity permutation.
    Natural,
}

/// Symbolic analysis: ordering, elimination tree and the pattern of the factor.
#[derive(Debug)]
struct Symbolic {
    n: usize,
    perm: Vec<usize>,
    pinv: Vec<usize>,
    // pattern of the analysed input, for reuse checks
    input_colptr: Vec<usize>,
    input_rowidx: Vec<usize>,
    // upper triangle of P M Pᵀ, and where each input value lands in it
    c_colptr: Vec<usize>,
    c_rowidx: Vec<usize>,
    value_map: Vec<usize>,
    // factor pattern
    lp: Vec<usize>,
    li: Vec<usize>,
    // nonzero pattern of row k of the factor, strictly left of the diagonal
    row_ptr: Vec<usize>,
    row_pat: Vec<usize>,
}

impl Symbolic {
    fn analyze(m: &SparseMatrix, ordering: Ordering) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "cannot factor a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        if !m.is_symmetric() {
            return Err(Error::DimensionMismatch(
                "factorization requires a symmetric matrix".into(),
            ));
        }
        let n = m.ncols();
        if n == 0 {
            return Err(Error::DimensionMismatch("empty matrix".into()));
        }
        let perm = match ordering {
            Ordering::MinimumDegree => minimum_degree(m),
            Ordering::Natural => (0..n).collect(),
        };
        let mut pinv = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }

        // upper triangle of the permuted matrix
        let mut entries: Vec<(usize, usize, usize)> = Vec::with_capacity(m.nnz() / 2 + n);
        for j in 0..n {
            for p in m.colptr()[j]..m.colptr()[j + 1] {
                let (ri, cj) = (pinv[m.rowidx()[p]], pinv[j]);
                if ri <= cj {
                    entries.push((cj, ri, p));
                }
            }
        }
        entries.sort_unstable();
        let mut c_colptr = vec![0; n + 1];
        let mut c_rowidx = Vec::with_capacity(entries.len());
        let mut value_map = vec![usize::MAX; m.nnz()];
        for (q, &(col, row, p)) in entries.iter().enumerate() {
            c_colptr[col + 1] += 1;
            c_rowidx.push(row);
            value_map[p] = q;
        }
        for j in 0..n {
            c_colptr[j + 1] += c_colptr[j];
        }

        // elimination tree with path compression
        let mut parent = vec![usize::MAX; n];
        let mut ancestor = vec![usize::MAX; n];
        for k in 0..n {
            for &row in &c_rowidx[c_colptr[k]..c_colptr[k + 1]] {
                let mut i = row;
                while i != usize::MAX && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == usize::MAX {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }

        // row patterns by walking up the tree from each entry of column k
        let mut mark = vec![usize::MAX; n];
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut row_pat = Vec::new();
        let mut counts = vec![1usize; n];
        row_ptr.push(0);
        for k in 0..n {
            mark[k] = k;
            let start = row_pat.len();
            for &row in &c_rowidx[c_colptr[k]..c_colptr[k + 1]] {
                let mut i = row;
                while i < k && mark[i] != k {
                    mark[i] = k;
                    row_pat.push(i);
                    counts[i] += 1;
                    i = parent[i];
                }
            }
            row_pat[start..].sort_unstable();
            row_ptr.push(row_pat.len());
        }

        let mut lp = vec![0; n + 1];
        for j in 0..n {
            lp[j + 1] = lp[j] + counts[j];
        }
        let mut next = lp.clone();
        let mut li = vec![0; lp[n]];
        for k in 0..n {
            li[next[k]] = k;
            next[k] += 1;
            for &i in &row_pat[row_ptr[k]..row_ptr[k + 1]] {
                li[next[i]] = k;
                next[i] += 1;
            }
        }

        Ok(Self {
            n,
            perm,
            pinv,
            input_colptr: m.colptr().to_vec(),
            input_rowidx: m.rowidx().to_vec(),
            c_colptr,
            c_rowidx,
            value_map,
            lp,
            li,
            row_ptr,
            row_pat,
        })
    }

    fn matches(&self, m: &SparseMatrix) -> bool {
        m.colptr() == self.input_colptr.as_slice() && m.rowidx() == self.input_rowidx.as_slice()
    }

    fn numeric(self: &Arc<Self>, m: &SparseMatrix) -> Result<CholeskyFactor> {
        let n = self.n;
        let mut cx = vec![0.0; self.c_rowidx.len()];
        for (p, &q) in self.value_map.iter().enumerate() {
            if q != usize::MAX {
                cx[q] = m.values()[p];
            }
        }
        let lp = &self.lp;
        let li = &self.li;
        let mut lx = vec![0.0; li.len()];
        let mut next: Vec<usize> = lp[..n].to_vec();
        let mut x = vec![0.0; n];
        for k in 0..n {
            for p in self.c_colptr[k]..self.c_colptr[k + 1] {
                x[self.c_rowidx[p]] = cx[p];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &self.row_pat[self.row_ptr[k]..self.row_ptr[k + 1]] {
                let lki = x[i] / lx[lp[i]];
                x[i] = 0.0;
                for p in lp[i] + 1..next[i] {
                    x[li[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                lx[next[i]] = lki;
                next[i] += 1;
            }
            if !(d > PIVOT_TOLERANCE) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    index: self.perm[k],
                    pivot: d,
                });
            }
            lx[next[k]] = d.sqrt();
            next[k] += 1;
        }
        Ok(CholeskyFactor {
            symbolic: Arc::clone(self),
            lx,
        })
    }
}

/// Reusable factorization engine. Keeps the symbolic analysis of the last
/// pattern it saw and redoes it only when the pattern changes.
#[derive(Debug, Clone, Default)]
pub struct CholeskySolver {
    ordering: Ordering,
    symbolic: Option<Arc<Symbolic>>,
}

impl CholeskySolver {
    pub fn new(ordering: Ordering) -> Self {
        Self {
            ordering,
            symbolic: None,
        }
    }

    pub fn factor(&mut self, m: &SparseMatrix) -> Result<CholeskyFactor> {
        let reuse = self.symbolic.as_ref().is_some_and(|s| s.matches(m)) && m.is_symmetric();
        if !reuse {
            self.symbolic = Some(Arc::new(Symbolic::analyze(m, self.ordering)?));
        }
        self.symbolic.as_ref().expect("analysed").numeric(m)
    }
}

/// Sparse Cholesky factor `F` with `P M Pᵀ = F Fᵀ`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    symbolic: Arc<Symbolic>,
    lx: Vec<f64>,
}

impl CholeskyFactor {
    /// Factors a symmetric positive definite matrix with a minimum-degree
    /// ordering.
    pub fn factorize(m: &SparseMatrix) -> Result<Self> {
        Self::factorize_with(m, Ordering::MinimumDegree)
    }

    pub fn factorize_with(m: &SparseMatrix, ordering: Ordering) -> Result<Self> {
        Arc::new(Symbolic::analyze(m, ordering)?).numeric(m)
    }

    pub fn dim(&self) -> usize {
        self.symbolic.n
    }

    /// `perm[k]` is the original index at permuted position `k`.
    pub fn permutation(&self) -> &[usize] {
        &self.symbolic.perm
    }

    /// Diagonal entries of the factor, in permuted order.
    pub fn diagonal(&self) -> Vec<f64> {
        let lp = &self.symbolic.lp;
        (0..self.dim()).map(|k| self.lx[lp[k]]).collect()
    }

    /// Lower-triangular factor in permuted coordinates.
    pub fn factor_matrix(&self) -> SparseMatrix {
        let s = &self.symbolic;
        let mut t = Vec::with_capacity(self.lx.len());
        for j in 0..s.n {
            for p in s.lp[j]..s.lp[j + 1] {
                t.push((s.li[p], j, self.lx[p]));
            }
        }
        SparseMatrix::from_triplets(s.n, s.n, &t).expect("factor pattern in range")
    }

    /// `log det M = 2 Σ log F_kk`.
    pub fn log_det(&self) -> f64 {
        let lp = &self.symbolic.lp;
        2.0 * (0..self.dim()).map(|k| self.lx[lp[k]].ln()).sum::<f64>()
    }

    /// Solves `F y = b` in place (permuted coordinates).
    fn lsolve(&self, y: &mut [f64]) {
        let s = &self.symbolic;
        for j in 0..s.n {
            let yj = y[j] / self.lx[s.lp[j]];
            y[j] = yj;
            for p in s.lp[j] + 1..s.lp[j + 1] {
                y[s.li[p]] -= self.lx[p] * yj;
            }
        }
    }

    /// Solves `Fᵀ y = b` in place (permuted coordinates).
    fn ltsolve(&self, y: &mut [f64]) {
        let s = &self.symbolic;
        for j in (0..s.n).rev() {
            let mut v = y[j];
            for p in s.lp[j] + 1..s.lp[j + 1] {
                v -= self.lx[p] * y[s.li[p]];
            }
            y[j] = v / self.lx[s.lp[j]];
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {len} for a factor of dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b.len())?;
        let s = &self.symbolic;
        let mut y: Vec<f64> = s.perm.iter().map(|&i| b[i]).collect();
        self.lsolve(&mut y);
        self.ltsolve(&mut y);
        Ok((0..s.n).map(|i| y[s.pinv[i]]).collect())
    }

    /// Draws `x ~ N(M⁻¹ h, M⁻¹)` where `M` is the factored precision.
    pub fn sample_gaussian_precision<R: Rng + ?Sized>(
        &self,
        mean_term: &[f64],
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.check_len(mean_term.len())?;
        let s = &self.symbolic;
        let mut z: Vec<f64> = (0..s.n).map(|_| rng.sample(StandardNormal)).collect();
        self.ltsolve(&mut z);
        let mut mean: Vec<f64> = s.perm.iter().map(|&i| mean_term[i]).collect();
        self.lsolve(&mut mean);
        self.ltsolve(&mut mean);
        Ok((0..s.n)
            .map(|i| {
                let k = s.pinv[i];
                mean[k] + z[k]
            })
            .collect())
    }

    /// Zero-mean draw `x ~ N(0, M⁻¹)`.
    pub fn sample_zero_mean<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let s = &self.symbolic;
        let mut z: Vec<f64> = (0..s.n).map(|_| rng.sample(StandardNormal)).collect();
        self.ltsolve(&mut z);
        (0..s.n).map(|i| z[s.pinv[i]]).collect()
    }
}
