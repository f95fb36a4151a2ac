//! Draws of the latent field from its prior.

use rand_distr::{Distribution, Exp, Gamma};

use crate::error::{Error, Result};
use crate::fem::FemMatrices;
use crate::graph::graph_laplacian;
use crate::mcmc::{derive_rng, Hyper};
use crate::sparse::CholeskyFactor;
use crate::PriorKind;

use super::{FieldStructure, ModelSpec, SpatialSupport};

/// Hyperparameters used for prior simulation: fixed values where given,
/// initial values otherwise.
pub fn simulation_hyper(spec: &ModelSpec) -> Hyper {
    let mut h = spec.init;
    for (p, v) in &spec.fixed {
        p.set(&mut h, *v);
    }
    h
}

/// `n_draws` independent prior draws of the node values. LMA auxiliaries
/// are redrawn for every field.
pub fn simulate_prior(spec: &ModelSpec, n_draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let field = match &spec.support {
        SpatialSupport::Mesh { mesh, alpha } => FieldStructure::mesh(&FemMatrices::assemble(mesh)?, *alpha, spec.prior)?,
        SpatialSupport::Graph { graph, k } => FieldStructure::graph(&graph_laplacian(graph), *k, spec.prior)?,
    };
    let h = simulation_hyper(spec);
    let bad = |e: rand_distr::GammaError| Error::InvalidParams(e.to_string());
    let mut rng = derive_rng(seed, 0);
    let grf = match spec.prior {
        PriorKind::Grf => Some(CholeskyFactor::factorize(&field.precision(h.kappa2, h.xi2, &[])?)?),
        PriorKind::Lma => None,
    };
    let op = match spec.prior {
        PriorKind::Lma => Some(field.lma_operator(h.kappa2)?),
        PriorKind::Grf => None,
    };
    (0..n_draws)
        .map(|_| match &grf {
            Some(f) => Ok(f.sample_zero_mean(&mut rng)),
            None => {
                let aux: Vec<f64> = if field.is_graph() {
                    let e = Exp::new(h.lambda2 / 2.0).map_err(|e| Error::InvalidParams(e.to_string()))?;
                    (0..field.n()).map(|_| e.sample(&mut rng)).collect()
                } else {
                    field
                        .mass()
                        .iter()
                        .map(|c| Ok(Gamma::new(h.tau * c, h.lambda2).map_err(bad)?.sample(&mut rng)))
                        .collect::<Result<_>>()?
                };
                let f = CholeskyFactor::factorize(&field.lma_precision(op.as_ref().expect("LMA operator"), &aux)?)?;
                Ok(f.sample_zero_mean(&mut rng))
            }
        })
        .collect()
}
