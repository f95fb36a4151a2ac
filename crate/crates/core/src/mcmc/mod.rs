//! Generic MCMC machinery: adaptive random-walk Metropolis–Hastings, greedy
//! colouring for single-site block updates, the positive-definiteness
//! guarded auxiliary update and the chain driver.

mod adaptive;
mod blocks;
mod pd;

pub use adaptive::{
    adaptive_mh_positive_block, adaptive_mh_scalar, mh_step_cached, AdaptiveTuner, Support, DEFAULT_BATCH,
    TARGET_ACCEPTANCE,
};
pub use blocks::{color_blocks, one_at_a_time_block_update, Flat, NodeLikelihood};
pub use pd::{factor_checked, pd_constrained_joint_update, PdGuard, PdOutcome, DEFAULT_RETRY_CAP, MAX_PIVOT_RATIO};

use std::time::Instant;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Hyperparameters. Unused ones stay at 1 and are not reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub kappa2: f64,
    pub xi2: f64,
    pub lambda2: f64,
    pub tau: f64,
    pub sigma2: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            kappa2: 1.0,
            xi2: 1.0,
            lambda2: 1.0,
            tau: 1.0,
            sigma2: 1.0,
        }
    }
}

/// Everything one chain carries between sweeps.
#[derive(Debug, Clone, Default)]
pub struct ChainState {
    pub beta: Vec<f64>,
    /// Basis weights `w` (mesh) or node effects `η` (graph).
    pub field: Vec<f64>,
    /// Unstructured effects `ε`, one per observation, when the model has them.
    pub nugget: Vec<f64>,
    /// `Γ` (mesh LMA) or `S` (graph LMA); empty for GRF priors.
    pub aux: Vec<f64>,
    pub hyper: Hyper,
    /// Probit latent utilities, one per observation.
    pub z: Vec<f64>,
    pub log_lik: f64,
}

/// A model-specific transition kernel driven by [`run_chain`].
pub trait Kernel {
    /// Names of the scalar quantities returned by [`Kernel::record`].
    fn parameter_names(&self) -> Vec<String>;

    fn initial_state(&mut self, rng: &mut ChaCha8Rng) -> Result<ChainState>;

    /// One full Gibbs sweep. Must leave `state.log_lik` current.
    fn sweep(&mut self, state: &mut ChainState, rng: &mut ChaCha8Rng) -> Result<()>;

    fn record(&self, state: &ChainState, out: &mut Vec<f64>);

    /// Names of functions of the state reported next to the parameters.
    fn derived_names(&self) -> Vec<String> {
        Vec::new()
    }

    fn record_derived(&self, _state: &ChainState, _out: &mut Vec<f64>) {}

    /// Switches proposal adaptation on or off for every tuner.
    fn set_adapting(&mut self, on: bool);

    /// Rank-deficiency rejections so far.
    fn pd_events(&self) -> u64 {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub n_store: usize,
    pub thin: usize,
    pub seed: u64,
    /// Stream of the master seed this chain draws from.
    pub stream: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            burn_in: 10_000,
            n_store: 50_000,
            thin: 1,
            seed: 1,
            stream: 0,
        }
    }
}

/// Independent generator for `stream` under one master seed.
pub fn derive_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stored draws of one chain.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub names: Vec<String>,
    /// `draws[k]` is the trace of `names[k]`.
    pub draws: Vec<Vec<f64>>,
    pub derived_names: Vec<String>,
    pub derived: Vec<Vec<f64>>,
    pub log_lik: Vec<f64>,
    /// Posterior mean of the latent field.
    pub field_mean: Vec<f64>,
    /// Wall-clock seconds of the stored (post burn-in) phase.
    pub seconds: f64,
    pub burn_in_seconds: f64,
    pub seed: u64,
    pub stream: u64,
    pub pd_events: u64,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.log_lik.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_lik.is_empty()
    }

    pub fn trace(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.draws[k].as_slice())
            .or_else(|| self.derived_names.iter().position(|n| n == name).map(|k| self.derived[k].as_slice()))
    }
}

/// Runs `burn_in` adaptive sweeps, freezes the tuners and stores `n_store`
/// states, one every `thin` sweeps. `on_store` sees every stored state.
pub fn run_chain<K: Kernel>(
    kernel: &mut K,
    cfg: &ChainConfig,
    mut on_store: Option<&mut dyn FnMut(&ChainState) -> Result<()>>,
) -> Result<PosteriorSamples> {
    if cfg.n_store == 0 || cfg.thin == 0 {
        return Err(Error::InvalidParams("n_store and thin must be at least 1".into()));
    }
    let mut rng = derive_rng(cfg.seed, cfg.stream);
    let names = kernel.parameter_names();
    let derived_names = kernel.derived_names();
    let mut state = kernel.initial_state(&mut rng)?;
    kernel.set_adapting(true);
    let start = Instant::now();
    for it in 0..cfg.burn_in {
        kernel.sweep(&mut state, &mut rng)?;
        if (it + 1) % 10_000 == 0 {
            info!("burn-in sweep {}/{}", it + 1, cfg.burn_in);
        }
    }
    kernel.set_adapting(false);
    let burn_in_seconds = start.elapsed().as_secs_f64();

    let mut draws = vec![Vec::with_capacity(cfg.n_store); names.len()];
    let mut log_lik = Vec::with_capacity(cfg.n_store);
    let mut field_sum = vec![0.0; state.field.len()];
    let mut derived = vec![Vec::with_capacity(cfg.n_store); derived_names.len()];
    let mut row = Vec::with_capacity(names.len());
    let start = Instant::now();
    for s in 0..cfg.n_store {
        for _ in 0..cfg.thin {
            kernel.sweep(&mut state, &mut rng)?;
        }
        row.clear();
        kernel.record(&state, &mut row);
        debug_assert_eq!(row.len(), names.len());
        for (d, v) in draws.iter_mut().zip(&row) {
            d.push(*v);
        }
        row.clear();
        kernel.record_derived(&state, &mut row);
        for (d, v) in derived.iter_mut().zip(&row) {
            d.push(*v);
        }
        log_lik.push(state.log_lik);
        for (a, v) in field_sum.iter_mut().zip(&state.field) {
            *a += v;
        }
        if let Some(f) = on_store.as_mut() {
            f(&state)?;
        }
        if (s + 1) % 10_000 == 0 {
            info!("stored {}/{}", s + 1, cfg.n_store);
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let n = cfg.n_store as f64;
    Ok(PosteriorSamples {
        names,
        draws,
        derived_names,
        derived,
        log_lik,
        field_mean: field_sum.into_iter().map(|v| v / n).collect(),
        seconds,
        burn_in_seconds,
        seed: cfg.seed,
        stream: cfg.stream,
        pd_events: kernel.pd_events(),
    })
}
