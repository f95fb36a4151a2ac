//! Held-out predictive densities. On a mesh the test locations are projected
//! through their own `A` rows. On a graph the field covers every node; with
//! a Gaussian response, nodes that carry no training record are integrated
//! out of their Gaussian full conditional, otherwise the drawn values are used.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::field::FieldStructure;
use super::sampler::obs_log_density;
use super::{Dataset, Family, Locations, ModelSpec, SpatialSupport};
use crate::error::{Error, Result};
use crate::fem::FemMatrices;
use crate::graph::graph_laplacian;
use crate::mcmc::ChainState;
use crate::sparse::{CholeskySolver, SparseMatrix};

#[derive(Debug, Clone)]
struct Marginalized {
    field: FieldStructure,
    /// Graph nodes integrated out.
    nodes: Vec<usize>,
    /// Position in `nodes` of each held-out record's node, if integrated.
    slot: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct HeldOut {
    family: Family,
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    a: SparseMatrix,
    log_offset: Vec<f64>,
    nugget: bool,
    marginal: Option<Marginalized>,
}

impl HeldOut {
    /// Scores `test` against fits to `train`.
    pub fn new(spec: &ModelSpec, train: &Dataset, test: &Dataset) -> Result<Self> {
        test.validate(spec)?;
        let a = test.observation_matrix(&spec.support)?;
        let log_offset = match (&test.offset, spec.offset) {
            (Some(o), true) => o.iter().map(|v| v.ln()).collect(),
            _ => vec![0.0; test.n_obs()],
        };
        let marginal = match (&spec.support, &train.locations, &test.locations, spec.family) {
            (SpatialSupport::Graph { graph, k }, Locations::Nodes(tr), Locations::Nodes(te), Family::Gaussian) => {
                let mut nodes: Vec<usize> = te.iter().copied().filter(|i| !tr.contains(i)).collect();
                nodes.sort_unstable();
                nodes.dedup();
                let slot = te.iter().map(|i| nodes.binary_search(i).ok()).collect();
                let field = FieldStructure::graph(&graph_laplacian(graph), *k, spec.prior)?;
                (!nodes.is_empty()).then_some(Marginalized { field, nodes, slot })
            }
            (SpatialSupport::Mesh { mesh, alpha }, ..) => {
                // validates the support once more; meshes never marginalize
                FieldStructure::mesh(&FemMatrices::assemble(mesh)?, *alpha, spec.prior)?;
                None
            }
            _ => None,
        };
        Ok(Self {
            family: spec.family,
            y: test.y.clone(),
            x: test.x.clone(),
            a,
            log_offset,
            nugget: spec.nugget && spec.family == Family::Poisson,
            marginal,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn fixed_part(&self, st: &ChainState, r: usize) -> f64 {
        let xb: f64 = self.x[r].iter().zip(&st.beta).map(|(a, b)| a * b).sum();
        xb + self.log_offset[r]
    }

    /// Joint log density of every held-out record at one stored state.
    /// Unstructured effects of the test records are drawn afresh.
    pub fn log_density<R: Rng + ?Sized>(&self, st: &ChainState, rng: &mut R) -> Result<f64> {
        let aw = self.a.mul_vec(&st.field);
        let eps = if self.nugget {
            Some(
                Normal::new(0.0, st.hyper.sigma2.sqrt())
                    .map_err(|e| Error::InvalidParams(format!("nugget variance: {e}")))?,
            )
        } else {
            None
        };
        let mut total = 0.0;
        for (r, y) in self.y.iter().enumerate() {
            if self.marginal.as_ref().is_some_and(|m| m.slot[r].is_some()) {
                continue;
            }
            let e = eps.as_ref().map_or(0.0, |d| d.sample(rng));
            total += obs_log_density(self.family, *y, self.fixed_part(st, r) + aw[r] + e, st.hyper.sigma2);
        }
        if let Some(m) = &self.marginal {
            total += self.marginal_gaussian(m, st)?;
        }
        Ok(total)
    }

    /// `log ∫ N(y_f; Xβ + Bη_f, σ²I) N(η_f; μ, P_ff⁻¹) dη_f` where `μ, P_ff`
    /// come from the full conditional of the free nodes.
    fn marginal_gaussian(&self, m: &Marginalized, st: &ChainState) -> Result<f64> {
        let h = &st.hyper;
        let p = m.field.precision(h.kappa2, h.xi2, &st.aux)?;
        let p_ff = p.select_rows(&m.nodes).transpose().select_rows(&m.nodes).symmetrize()?;
        let mut masked = st.field.clone();
        for &i in &m.nodes {
            masked[i] = 0.0;
        }
        let v = p.mul_vec(&masked);
        let v_f: Vec<f64> = m.nodes.iter().map(|&i| -v[i]).collect();
        let mut solver = CholeskySolver::default();
        let f_p = solver.factor(&p_ff)?;
        let mu = f_p.solve(&v_f)?;

        let s2 = h.sigma2;
        let q = m.nodes.len();
        let mut counts = vec![0.0; q];
        let mut b = vec![0.0; q];
        let mut rss = 0.0;
        let mut n_rec = 0.0;
        for (r, slot) in m.slot.iter().enumerate() {
            if let Some(j) = *slot {
                let res = self.y[r] - self.fixed_part(st, r) - mu[j];
                rss += res * res;
                b[j] += res / s2;
                counts[j] += 1.0 / s2;
                n_rec += 1.0;
            }
        }
        let hm = p_ff.add_scaled(1.0, &SparseMatrix::diagonal(&counts), 1.0)?.symmetrize()?;
        let f_h = solver.factor(&hm)?;
        let hb = f_h.solve(&b)?;
        let quad: f64 = hb.iter().zip(&b).map(|(x, y)| x * y).sum();
        Ok(-0.5 * n_rec * (2.0 * std::f64::consts::PI * s2).ln() - rss / (2.0 * s2)
            + 0.5 * f_p.log_det()
            - 0.5 * f_h.log_det()
            + 0.5 * quad)
    }
}
