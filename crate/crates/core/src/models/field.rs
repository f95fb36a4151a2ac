//! Spatial structure shared by both supports. A graph of order `k` behaves
//! like a mesh with `C = I`, `G` the graph Laplacian and `α = k + 1`; the one
//! difference is the even-`k` LMA operator, which uses a Cholesky factor.

use crate::error::{Error, Result};
use crate::fem::{self, FemMatrices};
use crate::graph::DifferenceOperator;
use crate::sparse::{CholeskySolver, SparseMatrix};
use crate::PriorKind;

#[derive(Debug, Clone)]
pub struct FieldStructure {
    d: Vec<f64>,
    g: SparseMatrix,
    alpha: u32,
    graph_order: Option<u32>,
    log_det_c: f64,
    prior: PriorKind,
}

/// Everything that depends on `κ²` alone.
#[derive(Debug, Clone)]
pub struct KappaTerms {
    pub kappa2: f64,
    pub l: SparseMatrix,
    pub log_det_l: f64,
    /// `Q_α` without the `1/ξ²` factor (GRF) or the operator `K` (LMA).
    pub op: SparseMatrix,
}

impl FieldStructure {
    pub fn mesh(fem: &FemMatrices, alpha: u32, prior: PriorKind) -> Result<Self> {
        fem::SpdeOrder::new(alpha, prior)?;
        Ok(Self {
            d: fem.c.clone(),
            g: fem.g.clone(),
            alpha,
            graph_order: None,
            log_det_c: fem.log_det_c(),
            prior,
        })
    }

    pub fn graph(laplacian: &SparseMatrix, k: u32, prior: PriorKind) -> Result<Self> {
        Ok(Self {
            d: vec![1.0; laplacian.nrows()],
            g: laplacian.clone(),
            alpha: k + 1,
            graph_order: Some(k),
            log_det_c: 0.0,
            prior,
        })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// Lumped mass diagonal (ones on a graph).
    pub fn mass(&self) -> &[f64] {
        &self.d
    }

    pub fn prior(&self) -> PriorKind {
        self.prior
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn is_graph(&self) -> bool {
        self.graph_order.is_some()
    }

    /// `L = κ²C + G`.
    pub fn l(&self, kappa2: f64) -> Result<SparseMatrix> {
        if !(kappa2 > 0.0) || !kappa2.is_finite() {
            return Err(Error::NonPositiveKappa(kappa2.sqrt()));
        }
        SparseMatrix::diagonal(&self.d).add_scaled(kappa2, &self.g, 1.0)?.symmetrize()
    }

    pub fn terms(&self, solver: &mut CholeskySolver, kappa2: f64) -> Result<KappaTerms> {
        let l = self.l(kappa2)?;
        let log_det_l = solver.factor(&l)?.log_det();
        let op = match self.prior {
            PriorKind::Grf => self.grf_precision(kappa2)?,
            PriorKind::Lma => self.lma_operator(kappa2)?,
        };
        Ok(KappaTerms {
            kappa2,
            l,
            log_det_l,
            op,
        })
    }

    /// `Q_α` at unit `ξ²`.
    pub fn grf_precision(&self, kappa2: f64) -> Result<SparseMatrix> {
        fem::grf_precision(&SparseMatrix::diagonal(&self.d), &self.g, kappa2.sqrt(), self.alpha)
    }

    /// `K_α` on a mesh, `Δ^(k)` on a graph.
    pub fn lma_operator(&self, kappa2: f64) -> Result<SparseMatrix> {
        match self.graph_order {
            Some(k) => Ok(DifferenceOperator::new(&self.g, kappa2, k)?.matrix().clone()),
            None => fem::lma_operator(&SparseMatrix::diagonal(&self.d), &self.g, kappa2.sqrt(), self.alpha),
        }
    }

    /// `log det Q_α`.
    pub fn grf_log_det(&self, log_det_l: f64) -> f64 {
        fem::grf_log_det(log_det_l, self.log_det_c, self.alpha)
    }

    /// `log |det K|`; on a graph `(k+1)/2 · log det L` for either parity.
    pub fn lma_log_det(&self, log_det_l: f64) -> f64 {
        let h = 0.5 * self.alpha as f64;
        h * log_det_l - (h - 1.0) * self.log_det_c
    }

    /// `wᵀ Q_α w` from `L` alone, peeling `Q_α = L C⁻¹ Q_{α−2} C⁻¹ L`.
    pub fn grf_quad(&self, l: &SparseMatrix, w: &[f64]) -> f64 {
        let mut x = w.to_vec();
        let mut a = self.alpha;
        while a > 2 {
            x = l.mul_vec(&x).iter().zip(&self.d).map(|(v, c)| v / c).collect();
            a -= 2;
        }
        let lx = l.mul_vec(&x);
        if a == 1 {
            lx.iter().zip(&x).map(|(p, q)| p * q).sum()
        } else {
            lx.iter().zip(&self.d).map(|(v, c)| v * v / c).sum()
        }
    }

    /// Prior precision of the field at `κ²`, `ξ²` (GRF) or auxiliaries (LMA).
    pub fn precision(&self, kappa2: f64, xi2: f64, aux: &[f64]) -> Result<SparseMatrix> {
        match self.prior {
            PriorKind::Grf => Ok(self.grf_precision(kappa2)?.scale(1.0 / xi2)),
            PriorKind::Lma => self.lma_precision(&self.lma_operator(kappa2)?, aux),
        }
    }

    /// LMA precision `Kᵀ diag(1/v) K`.
    pub fn lma_precision(&self, op: &SparseMatrix, aux: &[f64]) -> Result<SparseMatrix> {
        let inv: Vec<f64> = aux.iter().map(|v| 1.0 / v).collect();
        op.gram(Some(&inv))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{graph_laplacian, GraphSupport};

    #[test]
    fn quad_form_matches_matrix() {
        let g = GraphSupport::new(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).unwrap();
        let a = graph_laplacian(&g);
        let w = [0.3, -1.2, 0.7, 2.0, -0.4];
        for k in 0..4 {
            let f = FieldStructure::graph(&a, k, PriorKind::Grf).unwrap();
            let q = f.grf_precision(0.6).unwrap();
            let direct = q.quad_form(&w);
            assert!((f.grf_quad(&f.l(0.6).unwrap(), &w) - direct).abs() < 1e-10 * direct.abs());
        }
    }
}
