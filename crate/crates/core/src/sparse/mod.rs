//! Compressed sparse matrices and sparse Cholesky factorization.
//!
//! Matrices are stored in compressed sparse column (CSC) layout with row
//! indices sorted within each column. Symmetric matrices store both triangles
//! so that products and transposes need no special casing.

mod cholesky;
mod ordering;

pub use cholesky::{CholeskyFactor, CholeskySolver, Ordering};
pub use ordering::minimum_degree;

use crate::error::{Error, Result};

/// A sparse matrix in compressed column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and exact zeros are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::DimensionMismatch(format!(
                    "triplet ({i}, {j}) outside {nrows}x{ncols}"
                )));
            }
        }
        let mut counts = vec![0usize; ncols + 1];
        for &(_, j, _) in triplets {
            counts[j + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            let p = next[j];
            rows[p] = i;
            vals[p] = v;
            next[j] += 1;
        }
        let mut colptr = Vec::with_capacity(ncols + 1);
        let mut rowidx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        colptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for j in 0..ncols {
            order.clear();
            order.extend(counts[j]..counts[j + 1]);
            order.sort_by_key(|&p| rows[p]);
            let mut k = 0;
            while k < order.len() {
                let row = rows[order[k]];
                let mut sum = 0.0;
                while k < order.len() && rows[order[k]] == row {
                    sum += vals[order[k]];
                    k += 1;
                }
                if sum != 0.0 {
                    rowidx.push(row);
                    values.push(sum);
                }
            }
            colptr.push(rowidx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            colptr,
            rowidx,
            values,
            symmetric: false,
        })
    }

    /// Builds a symmetric matrix from triplets of the lower or upper triangle
    /// (each off-diagonal pair listed once); the mirror entries are added.
    pub fn from_symmetric_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut full = Vec::with_capacity(2 * triplets.len());
        for &(i, j, v) in triplets {
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        let mut m = Self::from_triplets(n, n, &full)?;
        m.symmetric = true;
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    /// Diagonal matrix; zero entries are not stored.
    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowidx = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        colptr.push(0);
        for (i, &v) in d.iter().enumerate() {
            if v != 0.0 {
                rowidx.push(i);
                values.push(v);
            }
            colptr.push(rowidx.len());
        }
        Self {
            nrows: n,
            ncols: n,
            colptr,
            rowidx,
            values,
            symmetric: true,
        }
    }

    /// Dense row-major input, mostly for tests and small fixtures.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch("ragged dense input".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        let mut m = Self::from_triplets(nrows, ncols, &t)?;
        m.symmetric = m.is_structurally_symmetric_exact();
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Whether the symmetry flag is set.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowidx(&self) -> &[usize] {
        &self.rowidx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Iterates the stored entries of column `j` as `(row, value)`.
    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.colptr[j]..self.colptr[j + 1];
        self.rowidx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    /// Iterates all stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| self.col(j).map(move |(i, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.colptr[j]..self.colptr[j + 1];
        match self.rowidx[r.clone()].binary_search(&i) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// The main diagonal (zeros where nothing is stored).
    pub fn diag(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.nrows + 1];
        for &i in &self.rowidx {
            counts[i + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut rowidx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                let p = next[i];
                rowidx[p] = j;
                values[p] = v;
                next[i] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            colptr: counts,
            rowidx,
            values,
            symmetric: self.symmetric,
        }
    }

    fn is_structurally_symmetric_exact(&self) -> bool {
        self.is_square() && *self == Self { symmetric: false, ..self.transpose() }
    }

    /// Checks that the matrix equals its transpose exactly (pattern and
    /// values) and sets the symmetry flag if so.
    pub fn check_symmetric(mut self) -> Result<Self> {
        self.symmetric = false;
        if self.is_structurally_symmetric_exact() {
            self.symmetric = true;
            Ok(self)
        } else {
            Err(Error::DimensionMismatch(
                "matrix is not symmetric".to_string(),
            ))
        }
    }

    /// Returns `(A + Aᵀ)/2`, which is exactly symmetric.
    pub fn symmetrize(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("symmetrize needs a square matrix".into()));
        }
        let mut m = self.add_scaled(0.5, &self.transpose(), 0.5)?;
        // a + b and b + a round identically, so the result is bitwise symmetric
        m.symmetric = true;
        Ok(m)
    }

    /// `alpha * self + beta * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut colptr = Vec::with_capacity(self.ncols + 1);
        let mut rowidx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        colptr.push(0);
        for j in 0..self.ncols {
            let (mut a, ae) = (self.colptr[j], self.colptr[j + 1]);
            let (mut b, be) = (other.colptr[j], other.colptr[j + 1]);
            while a < ae || b < be {
                let ra = if a < ae { self.rowidx[a] } else { usize::MAX };
                let rb = if b < be { other.rowidx[b] } else { usize::MAX };
                let (row, v) = if ra == rb {
                    let v = alpha * self.values[a] + beta * other.values[b];
                    a += 1;
                    b += 1;
                    (ra, v)
                } else if ra < rb {
                    a += 1;
                    (ra, alpha * self.values[a - 1])
                } else {
                    b += 1;
                    (rb, beta * other.values[b - 1])
                };
                if v != 0.0 {
                    rowidx.push(row);
                    values.push(v);
                }
            }
            colptr.push(rowidx.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            colptr,
            rowidx,
            values,
            symmetric: self.symmetric && other.symmetric,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = self.clone();
        if s == 0.0 {
            return Self::from_triplets(self.nrows, self.ncols, &[]).expect("empty");
        }
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        let mut m = self.clone();
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                m.values[p] *= d[self.rowidx[p]];
            }
        }
        m.symmetric = false;
        m
    }

    /// `self * diag(d)`.
    pub fn scale_cols(&self, d: &[f64]) -> Self {
        let mut m = self.clone();
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                m.values[p] *= d[j];
            }
        }
        m.symmetric = false;
        m
    }

    /// Sparse matrix product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut colptr = Vec::with_capacity(other.ncols + 1);
        let mut rowidx = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0; self.nrows];
        let mut mark = vec![usize::MAX; self.nrows];
        let mut touched: Vec<usize> = Vec::new();
        colptr.push(0);
        for j in 0..other.ncols {
            touched.clear();
            for (k, b) in other.col(j) {
                for (i, a) in self.col(k) {
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = 0.0;
                        touched.push(i);
                    }
                    acc[i] += a * b;
                }
            }
            touched.sort_unstable();
            for &i in &touched {
                if acc[i] != 0.0 {
                    rowidx.push(i);
                    values.push(acc[i]);
                }
            }
            colptr.push(rowidx.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: other.ncols,
            colptr,
            rowidx,
            values,
            symmetric: false,
        })
    }

    /// `y = self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "mul_vec dimension mismatch");
        let mut y = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (i, v) in self.col(j) {
                y[i] += v * xj;
            }
        }
        y
    }

    /// `y = selfᵀ * x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "tr_mul_vec dimension mismatch");
        (0..self.ncols)
            .map(|j| self.col(j).map(|(i, v)| v * x[i]).sum())
            .collect()
    }

    /// `xᵀ self x` for a square matrix.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let y = self.mul_vec(x);
        y.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `selfᵀ diag(w) self`, exactly symmetric. `w = None` means identity.
    pub fn gram(&self, w: Option<&[f64]>) -> Result<Self> {
        let t = self.transpose();
        let right = match w {
            Some(w) => self.scale_rows(w),
            None => self.clone(),
        };
        t.matmul(&right)?.symmetrize()
    }

    /// Rows selected in order, as a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let t = self.transpose();
        let mut triplets = Vec::new();
        for (new_i, &i) in rows.iter().enumerate() {
            for (j, v) in t.col(i) {
                triplets.push((new_i, j, v));
            }
        }
        Self::from_triplets(rows.len(), self.ncols, &triplets).expect("in range")
    }

    /// Same stored pattern (dimensions, column pointers and row indices).
    pub fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.colptr == other.colptr
            && self.rowidx == other.rowidx
    }

    pub(crate) fn set_symmetric_flag(&mut self, flag: bool) {
        self.symmetric = flag;
    }
}
