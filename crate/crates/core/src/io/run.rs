//! Runs a parsed configuration end to end and writes its outputs.

use std::path::PathBuf;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::{cross_validate, make_folds};
use crate::mcmc::ChainConfig;
use crate::models::{fit, simulate_prior, ModelSpec, SpatialSupport};

use super::config::{Command, RunConfig};
use super::data::{load_dataset, load_support, LoadedData};
use super::output;

/// Model specification described by `cfg`, for `support`.
pub fn build_spec(cfg: &RunConfig, support: SpatialSupport, has_offset: bool) -> Result<ModelSpec> {
    let m = &cfg.model;
    let mut spec = ModelSpec::new(m.family, support, m.prior);
    spec.nugget = m.nugget;
    spec.offset = has_offset;
    spec.beta_variance = m.beta_variance;
    spec.aux_update = m.aux_update;
    spec.aux_init = m.aux_init;
    spec.retry_cap = m.retry_cap;
    for p in &m.priors {
        spec = spec.with_prior(*p);
    }
    spec.fixed = m.fixed.clone();
    for (h, v) in &m.init {
        h.set(&mut spec.init, *v);
    }
    spec.validate()?;
    Ok(spec)
}

fn header(cfg: &RunConfig) -> String {
    format!("lmafield {} seed={}", cfg.command, cfg.mcmc.seed)
}

fn prepare(cfg: &RunConfig) -> Result<(ModelSpec, Option<LoadedData>)> {
    let support = load_support(&cfg.support)?;
    let data = cfg.data.as_ref().map(load_dataset).transpose()?;
    let has_offset = data.as_ref().is_some_and(|d| d.data.offset.is_some());
    let spec = build_spec(cfg, support, has_offset)?;
    if let Some(d) = &data {
        d.data.validate(&spec)?;
    }
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    Ok((spec, data))
}

fn require_data(data: Option<LoadedData>, cfg: &RunConfig) -> Result<LoadedData> {
    data.ok_or_else(|| Error::Config(vec![format!("[data]: required by `{}`", cfg.command)]))
}

/// Dispatches on `cfg.command` and returns the files written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    match cfg.command {
        Command::Fit => run_fit(cfg),
        Command::Cv => run_cv(cfg),
        Command::Simulate => run_simulate(cfg),
    }
}

/// Fits `cfg.chains` chains, on streams `0..chains` of the master seed.
pub fn run_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (spec, data) = prepare(cfg)?;
    let data = require_data(data, cfg)?.data;
    let chains = (0..cfg.chains as u64)
        .into_par_iter()
        .map(|c| {
            let chain_cfg = ChainConfig { stream: c, ..cfg.mcmc };
            fit(&spec, &data, &chain_cfg, None).map(|(s, _)| s)
        })
        .collect::<Result<Vec<_>>>()?;
    for (c, s) in chains.iter().enumerate() {
        info!("chain {c}: {:.1}s after burn-in, {} rank-deficient proposals", s.seconds, s.pd_events);
    }
    let h = header(cfg);
    let pooled = output::pool_chains(&chains).expect("at least one chain");
    let mut files = vec![output::write_samples(&cfg.output, &h, &chains)?];
    files.extend(output::write_summary(&cfg.output, &h, &pooled)?);
    files.push(output::write_report(&cfg.output, &h, &chains)?);
    files.push(output::write_predictions(&cfg.output, &h, &spec.support, &pooled.field_mean)?);
    Ok(files)
}

/// K-fold cross-validation; folds follow the group column when one is set.
pub fn run_cv(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (spec, data) = prepare(cfg)?;
    let loaded = require_data(data, cfg)?;
    if cfg.chains > 1 {
        warn!("cross-validation runs one chain per fold; ignoring chains = {}", cfg.chains);
    }
    let plan = make_folds(loaded.data.n_obs(), cfg.cv.folds, loaded.groups.as_deref(), cfg.mcmc.seed)?;
    let start = Instant::now();
    let cv = cross_validate(&spec, &loaded.data, &plan, &cfg.mcmc)?;
    let seconds = start.elapsed().as_secs_f64();
    info!("BCVS {:.3} over {} folds in {seconds:.1}s", cv.bcvs, plan.k);
    output::write_cv(&cfg.output, &header(cfg), &cv, seconds)
}

/// Prior draws of the field at the configured hyperparameters.
pub fn run_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (spec, _) = prepare(cfg)?;
    let draws = simulate_prior(&spec, cfg.draws, cfg.mcmc.seed)?;
    Ok(vec![output::write_simulation(&cfg.output, &header(cfg), &draws)?])
}
