//! Bayesian spatial generalized linear mixed models with Gaussian random
//! field (GRF) and Laplace moving average (LMA) priors, on triangular meshes
//! or on graphs.
pub mod distributions;
pub mod evaluation;
pub mod error;
pub mod fem;
pub mod graph;
pub mod io;
pub mod mcmc;
pub mod models;
pub mod sparse;
pub mod stats;

pub use error::{Error, Result};

/// Which prior drives the spatial field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PriorKind {
    /// Gaussian random field.
    Grf,
    /// Laplace moving average.
    Lma,
}
