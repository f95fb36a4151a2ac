//! Spatial GLMMs `g(μ) = xᵀβ + η(u) + ε(u)` with Gaussian, probit and
//! Poisson responses, GRF or LMA field priors, on a mesh or a graph.
//!
//! Sampled hyperparameters are `κ²`, `ξ²` (GRF), `λ²` and `τ` (LMA) and `σ²`.
//! On a mesh the LMA auxiliaries are `Γ_i ~ Gamma(τC_ii, scale λ²)`; on a
//! graph they are `S_i ~ Exp(rate λ²/2)`, so that each `(Δη)_i` is marginally
//! Laplace with rate `λ`.

mod field;
mod penalty;
mod predict;
mod priors;
mod sampler;
mod simulate;

pub use field::{FieldStructure, KappaTerms};
pub use penalty::penalty_logprior;
pub use predict::HeldOut;
pub use priors::{HyperPrior, Hyperparameter, PriorDensity, PriorTarget};
pub use sampler::{fit, SglmmSampler};
pub use simulate::{simulate_prior, simulation_hyper};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::{assemble_projection, Mesh, SpdeOrder};
use crate::graph::GraphSupport;
use crate::mcmc::{Hyper, DEFAULT_RETRY_CAP};
use crate::sparse::SparseMatrix;
use crate::PriorKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Probit,
    Poisson,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "binary_probit" | "probit" => Ok(Self::Probit),
            "poisson" => Ok(Self::Poisson),
            _ => Err(Error::InvalidModel(format!("unknown family `{s}`"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Probit => "binary_probit",
            Self::Poisson => "poisson",
        })
    }
}

/// Where the field lives.
#[derive(Debug, Clone)]
pub enum SpatialSupport {
    /// Triangular mesh with SPDE order `α`.
    Mesh { mesh: Mesh, alpha: u32 },
    /// Graph with differencing order `k`.
    Graph { graph: GraphSupport, k: u32 },
}

impl SpatialSupport {
    pub fn n_nodes(&self) -> usize {
        match self {
            Self::Mesh { mesh, .. } => mesh.n_nodes(),
            Self::Graph { graph, .. } => graph.n_nodes(),
        }
    }
}

/// How LMA auxiliaries are refreshed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxUpdate {
    /// One-at-a-time adaptive random-walk MH (mesh); inverse-Gaussian Gibbs
    /// on a graph.
    Metropolis,
    /// Conjugate draws: GIG on a mesh, inverse Gaussian on a graph.
    Gibbs,
    /// Held at their initial values.
    Fixed,
}

impl FromStr for AuxUpdate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mh" | "metropolis" => Ok(Self::Metropolis),
            "gibbs" => Ok(Self::Gibbs),
            "fixed" => Ok(Self::Fixed),
            _ => Err(Error::InvalidModel(format!("unknown auxiliary update `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub family: Family,
    pub support: SpatialSupport,
    pub prior: PriorKind,
    /// Poisson only: include `ε_i ~ N(0, σ²)`.
    pub nugget: bool,
    /// Poisson only: data carry an offset column.
    pub offset: bool,
    pub beta_variance: f64,
    pub priors: BTreeMap<Hyperparameter, HyperPrior>,
    pub fixed: BTreeMap<Hyperparameter, f64>,
    pub init: Hyper,
    pub aux_update: AuxUpdate,
    /// Initial auxiliary value; the prior mean when absent.
    pub aux_init: Option<f64>,
    pub retry_cap: usize,
}

impl ModelSpec {
    /// Defaults: `β ~ N(0, 1000 I)` and half-normal(1) priors on `κ`, `ξ`,
    /// `λ`, `τ` and `σ²`.
    pub fn new(family: Family, support: SpatialSupport, prior: PriorKind) -> Self {
        let mut priors = BTreeMap::new();
        for t in [PriorTarget::Kappa, PriorTarget::Xi, PriorTarget::Lambda, PriorTarget::Tau, PriorTarget::Sigma2] {
            priors.insert(t.parameter(), HyperPrior::half_normal(t, 1.0));
        }
        Self {
            family,
            support,
            prior,
            nugget: false,
            offset: false,
            beta_variance: 1000.0,
            priors,
            fixed: BTreeMap::new(),
            init: Hyper::default(),
            aux_update: AuxUpdate::Metropolis,
            aux_init: None,
            retry_cap: DEFAULT_RETRY_CAP,
        }
    }

    pub fn with_prior(mut self, p: HyperPrior) -> Self {
        self.priors.insert(p.target.parameter(), p);
        self
    }

    pub fn with_fixed(mut self, h: Hyperparameter, v: f64) -> Self {
        self.fixed.insert(h, v);
        self
    }

    /// Hyperparameters this model has, in reporting order.
    pub fn hyperparameters(&self) -> Vec<Hyperparameter> {
        let mut h = vec![Hyperparameter::Kappa2];
        match (self.prior, &self.support) {
            (PriorKind::Grf, _) => h.push(Hyperparameter::Xi2),
            (PriorKind::Lma, SpatialSupport::Mesh { .. }) => h.extend([Hyperparameter::Lambda2, Hyperparameter::Tau]),
            (PriorKind::Lma, SpatialSupport::Graph { .. }) => h.push(Hyperparameter::Lambda2),
        }
        if self.has_sigma2() {
            h.push(Hyperparameter::Sigma2);
        }
        h
    }

    pub fn has_sigma2(&self) -> bool {
        match self.family {
            Family::Gaussian => true,
            Family::Poisson => self.nugget,
            Family::Probit => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SpatialSupport::Mesh { alpha, .. } = self.support {
            SpdeOrder::new(alpha, self.prior)?;
        }
        if self.offset && self.family != Family::Poisson {
            return Err(Error::InvalidModel("an offset is only defined for Poisson responses".into()));
        }
        if self.nugget && self.family == Family::Probit {
            return Err(Error::InvalidModel("the probit model has no nugget term".into()));
        }
        if !(self.beta_variance > 0.0) || !self.beta_variance.is_finite() {
            return Err(Error::InvalidModel(format!("beta variance must be positive, got {}", self.beta_variance)));
        }
        let relevant = self.hyperparameters();
        for (h, v) in &self.fixed {
            if !relevant.contains(h) {
                return Err(Error::InvalidModel(format!("`{}` is not a parameter of this model", h.name())));
            }
            if !(*v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidModel(format!("fixed `{}` must be positive, got {v}", h.name())));
            }
        }
        for h in relevant {
            if !self.fixed.contains_key(&h) && !self.priors.contains_key(&h) {
                return Err(Error::InvalidModel(format!("no prior for `{}`", h.name())));
            }
            let v = h.get(&self.init);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidModel(format!("initial `{}` must be positive, got {v}", h.name())));
            }
        }
        if let Some(v) = self.aux_init {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidModel(format!("initial auxiliary value must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Where each observation sits.
#[derive(Debug, Clone, PartialEq)]
pub enum Locations {
    Points(Vec<[f64; 2]>),
    Nodes(Vec<usize>),
}

/// Observations in model form.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: Vec<f64>,
    /// Design rows, one per observation.
    pub x: Vec<Vec<f64>>,
    pub covariates: Vec<String>,
    pub locations: Locations,
    pub offset: Option<Vec<f64>>,
}

impl Dataset {
    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        let pick = |v: &[f64]| rows.iter().map(|&r| v[r]).collect::<Vec<_>>();
        Self {
            y: pick(&self.y),
            x: rows.iter().map(|&r| self.x[r].clone()).collect(),
            covariates: self.covariates.clone(),
            locations: match &self.locations {
                Locations::Points(p) => Locations::Points(rows.iter().map(|&r| p[r]).collect()),
                Locations::Nodes(n) => Locations::Nodes(rows.iter().map(|&r| n[r]).collect()),
            },
            offset: self.offset.as_ref().map(|o| pick(o)),
        }
    }

    /// Index of each row's distinct location, numbered by first appearance,
    /// and the number of distinct locations.
    pub fn location_keys(&self) -> (Vec<usize>, usize) {
        let mut seen: BTreeMap<(u64, u64), usize> = BTreeMap::new();
        let keys: Vec<(u64, u64)> = match &self.locations {
            Locations::Points(p) => p.iter().map(|q| (q[0].to_bits(), q[1].to_bits())).collect(),
            Locations::Nodes(n) => n.iter().map(|&i| (i as u64, 0)).collect(),
        };
        let mut out = Vec::with_capacity(keys.len());
        for k in keys {
            let next = seen.len();
            out.push(*seen.entry(k).or_insert(next));
        }
        let n = seen.len();
        (out, n)
    }

    /// Checks responses, offsets and locations against the model.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let n = self.n_obs();
        let loc_len = match &self.locations {
            Locations::Points(p) => p.len(),
            Locations::Nodes(v) => v.len(),
        };
        if self.x.len() != n || loc_len != n || self.x.iter().any(|r| r.len() != self.covariates.len()) {
            return Err(Error::DimensionMismatch(format!(
                "{n} responses, {} design rows, {loc_len} locations",
                self.x.len()
            )));
        }
        for (r, &y) in self.y.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::NonNumeric {
                    row: r + 1,
                    column: "response".into(),
                    value: y.to_string(),
                });
            }
            match spec.family {
                Family::Poisson if y < 0.0 || y.fract() != 0.0 => return Err(Error::NegativeCount(r + 1)),
                Family::Probit if y != 0.0 && y != 1.0 => return Err(Error::NonBinary(r + 1)),
                _ => {}
            }
        }
        match (&self.offset, spec.offset) {
            (Some(o), true) => {
                if o.len() != n {
                    return Err(Error::DimensionMismatch("offset length".into()));
                }
                if let Some(r) = o.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
                    return Err(Error::NonPositiveOffset(r + 1));
                }
            }
            (None, true) => return Err(Error::InvalidModel("the model expects an offset column".into())),
            _ => {}
        }
        match (&self.locations, &spec.support) {
            (Locations::Nodes(v), SpatialSupport::Graph { graph, .. }) => {
                if let Some(r) = v.iter().position(|&i| i >= graph.n_nodes()) {
                    return Err(Error::InvalidGraph(format!(
                        "row {}: node {} outside a graph of {} nodes",
                        r + 1,
                        v[r],
                        graph.n_nodes()
                    )));
                }
            }
            (Locations::Points(p), SpatialSupport::Mesh { mesh, .. }) => {
                assemble_projection(mesh, p)?;
            }
            _ => return Err(Error::InvalidModel("locations do not match the spatial support".into())),
        }
        Ok(())
    }

    /// Observation matrix `A` (`n_obs × n_nodes`): rows of the basis
    /// projection on a mesh, indicator rows on a graph. Repeated locations
    /// are projected once and replicated.
    pub fn observation_matrix(&self, support: &SpatialSupport) -> Result<SparseMatrix> {
        let (keys, n_loc) = self.location_keys();
        let mut first = vec![usize::MAX; n_loc];
        for (r, &k) in keys.iter().enumerate() {
            if first[k] == usize::MAX {
                first[k] = r;
            }
        }
        let a_loc = match (&self.locations, support) {
            (Locations::Points(p), SpatialSupport::Mesh { mesh, .. }) => {
                let pts: Vec<[f64; 2]> = first.iter().map(|&r| p[r]).collect();
                assemble_projection(mesh, &pts)?
            }
            (Locations::Nodes(v), SpatialSupport::Graph { graph, .. }) => {
                let t: Vec<_> = first.iter().enumerate().map(|(k, &r)| (k, v[r], 1.0)).collect();
                SparseMatrix::from_triplets(n_loc, graph.n_nodes(), &t)?
            }
            _ => return Err(Error::InvalidModel("locations do not match the spatial support".into())),
        };
        replication_matrix(&keys, n_loc)?.matmul(&a_loc)
    }
}

/// `B` with `B[r, keys[r]] = 1`: maps per-location quantities to records.
pub fn replication_matrix(keys: &[usize], n_groups: usize) -> Result<SparseMatrix> {
    let t: Vec<_> = keys.iter().enumerate().map(|(r, &k)| (r, k, 1.0)).collect();
    SparseMatrix::from_triplets(keys.len(), n_groups, &t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replication_column_sums() {
        let b = replication_matrix(&[0, 0, 1, 2, 2, 2], 3).unwrap();
        assert_eq!(b.tr_mul_vec(&[1.0; 6]), vec![2.0, 1.0, 3.0]);
    }

    #[test]
    fn lma_needs_even_alpha_on_a_mesh() {
        let mesh = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let spec = ModelSpec::new(Family::Gaussian, SpatialSupport::Mesh { mesh, alpha: 3 }, PriorKind::Lma);
        assert!(matches!(spec.validate(), Err(Error::OddAlphaUnsupported(3))));
    }
}
