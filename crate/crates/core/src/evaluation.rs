//! Cross-validation, BCVS, effective sample size and posterior summaries.

use std::collections::BTreeMap;

use log::{info, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::mcmc::{derive_rng, ChainConfig, PosteriorSamples};
use crate::models::{fit, Dataset, HeldOut, ModelSpec};
use crate::stats::{log_mean_exp, mean, quantile_sorted};

/// Shortest trace accepted by [`ess`].
pub const MIN_TRACE: usize = 100;

/// Streams at or above this offset feed held-out predictions, below it chains.
const PREDICTION_STREAM: u64 = 1 << 32;

/// Assignment of records to folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvPlan {
    pub folds: Vec<usize>,
    pub k: usize,
    pub grouped: bool,
    pub seed: u64,
}

impl CvPlan {
    /// `(train, test)` row indices of fold `f`.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.folds.len()).partition(|&i| self.folds[i] != f)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.folds {
            s[f] += 1;
        }
        s
    }
}

/// Random split of `n` records into `k` folds. With `groups`, records that
/// share a group key always land in the same fold and groups are balanced
/// instead of records.
pub fn make_folds(n: usize, k: usize, groups: Option<&[usize]>, seed: u64) -> Result<CvPlan> {
    if k < 2 {
        return Err(Error::InvalidParams(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = derive_rng(seed, PREDICTION_STREAM - 1);
    let folds = match groups {
        None => {
            if n < k {
                return Err(Error::InvalidParams(format!("{n} records cannot fill {k} folds")));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let mut folds = vec![0; n];
            for (pos, &i) in idx.iter().enumerate() {
                folds[i] = pos % k;
            }
            folds
        }
        Some(g) => {
            if g.len() != n {
                return Err(Error::DimensionMismatch(format!("{} group keys for {n} records", g.len())));
            }
            let mut keys: Vec<usize> = g.to_vec();
            keys.sort_unstable();
            keys.dedup();
            if keys.len() < k {
                return Err(Error::TooFewGroups {
                    groups: keys.len(),
                    folds: k,
                });
            }
            keys.shuffle(&mut rng);
            let of: BTreeMap<usize, usize> = keys.iter().enumerate().map(|(pos, &key)| (key, pos % k)).collect();
            g.iter().map(|key| of[key]).collect()
        }
    };
    Ok(CvPlan {
        folds,
        k,
        grouped: groups.is_some(),
        seed,
    })
}

/// `−Σ_k log( (1/T) Σ_t p_kt )` from per-fold log densities `log p_kt`.
/// Smaller is better.
pub fn bcvs(log_densities: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for (fold, lds) in log_densities.iter().enumerate() {
        if lds.is_empty() {
            return Err(Error::InvalidParams(format!("fold {fold} has no draws")));
        }
        if let Some(draw) = lds.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteDensity { fold, draw });
        }
        total -= log_mean_exp(lds);
    }
    Ok(total)
}

/// Autocorrelations at every lag, via FFT.
fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - m, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// Effective sample size with Geyer's initial monotone positive sequence,
/// capped at the trace length. A constant trace has ESS 0.
pub fn ess(trace: &[f64]) -> Result<f64> {
    let n = trace.len();
    if n < MIN_TRACE {
        return Err(Error::TraceTooShort(n));
    }
    let m = mean(trace);
    if trace.iter().all(|v| (v - m).abs() <= f64::EPSILON * m.abs().max(1.0)) {
        warn!("constant trace; effective sample size set to 0");
        return Ok(0.0);
    }
    let rho = autocorrelation(trace);
    // Γ_j = ρ_2j + ρ_2j+1, summed while positive and forced non-increasing
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut j = 0;
    while 2 * j + 1 < n {
        let g = rho[2 * j] + rho[2 * j + 1];
        if g <= 0.0 {
            break;
        }
        let g = g.min(prev);
        sum += g;
        prev = g;
        j += 1;
    }
    let tau = 2.0 * sum - 1.0;
    Ok((n as f64 / tau).min(n as f64))
}

pub fn ess_per_second(trace: &[f64], seconds: f64) -> Result<f64> {
    Ok(ess(trace)? / seconds)
}

/// Posterior mean and equal-tailed 95% interval of one quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub parameter: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn summarize_trace(name: &str, trace: &[f64]) -> SummaryRow {
    let mut s = trace.to_vec();
    s.sort_by(f64::total_cmp);
    SummaryRow {
        parameter: name.to_string(),
        mean: mean(trace),
        lower: quantile_sorted(&s, 0.025),
        upper: quantile_sorted(&s, 0.975),
    }
}

/// One row per sampled parameter, then one per derived quantity.
pub fn summarize(samples: &PosteriorSamples) -> Vec<SummaryRow> {
    samples
        .names
        .iter()
        .zip(&samples.draws)
        .chain(samples.derived_names.iter().zip(&samples.derived))
        .map(|(n, t)| summarize_trace(n, t))
        .collect()
}

/// Outcome of a cross-validation run.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub bcvs: f64,
    /// Log joint density of each fold's held-out records, per stored state.
    pub fold_log_densities: Vec<Vec<f64>>,
    pub plan: CvPlan,
}

/// Fits the model once per fold and scores the held-out records. Fold `f`
/// uses chain stream `cfg.stream + f + 1` of `cfg.seed`.
pub fn cross_validate(spec: &ModelSpec, data: &Dataset, plan: &CvPlan, cfg: &ChainConfig) -> Result<CvResult> {
    if plan.folds.len() != data.n_obs() {
        return Err(Error::DimensionMismatch(format!(
            "plan covers {} records, data has {}",
            plan.folds.len(),
            data.n_obs()
        )));
    }
    let fold_log_densities = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let (train, test) = plan.split(f);
            let train_data = data.subset(&train);
            let held = HeldOut::new(spec, &train_data, &data.subset(&test))?;
            let stream = cfg.stream + f as u64 + 1;
            let fold_cfg = ChainConfig { stream, ..*cfg };
            let mut rng = derive_rng(cfg.seed, PREDICTION_STREAM + stream);
            let mut lds = Vec::with_capacity(cfg.n_store);
            let mut hook = |st: &crate::mcmc::ChainState| {
                lds.push(held.log_density(st, &mut rng)?);
                Ok(())
            };
            fit(spec, &train_data, &fold_cfg, Some(&mut hook))?;
            info!("fold {}/{} done", f + 1, plan.k);
            Ok(lds)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvResult {
        bcvs: bcvs(&fold_log_densities)?,
        fold_log_densities,
        plan: plan.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_folds() {
        let p = make_folds(20, 10, None, 3).unwrap();
        assert!(p.fold_sizes().iter().all(|&s| s == 2));
        assert_eq!(p, make_folds(20, 10, None, 3).unwrap());
    }

    #[test]
    fn groups_stay_together() {
        let groups: Vec<usize> = (0..200).map(|i| i % 65).collect();
        let p = make_folds(200, 10, Some(&groups), 9).unwrap();
        for (i, g) in groups.iter().enumerate() {
            for (j, h) in groups.iter().enumerate() {
                if g == h {
                    assert_eq!(p.folds[i], p.folds[j]);
                }
            }
        }
        assert!(matches!(
            make_folds(4, 10, Some(&[0, 1, 2, 3]), 1),
            Err(Error::TooFewGroups { groups: 4, folds: 10 })
        ));
    }

    #[test]
    fn bcvs_hand_values() {
        let v = bcvs(&[vec![0.5f64.ln(), 0.25f64.ln()]]).unwrap();
        assert!((v + 0.375f64.ln()).abs() < 1e-12);
        assert_eq!(bcvs(&[vec![0.0; 4], vec![0.0; 4]]).unwrap(), 0.0);
        assert!(matches!(
            bcvs(&[vec![0.0], vec![0.0, f64::NAN]]),
            Err(Error::NonFiniteDensity { fold: 1, draw: 1 })
        ));
    }

    #[test]
    fn ess_edge_cases() {
        assert!(matches!(ess(&[1.0; 10]), Err(Error::TraceTooShort(10))));
        assert_eq!(ess(&[2.5; 200]).unwrap(), 0.0);
    }

    #[test]
    fn summary_of_three() {
        let r = summarize_trace("a", &[1.0, 2.0, 3.0]);
        assert_eq!(r.mean, 2.0);
        assert!(r.lower < r.mean && r.upper > r.mean);
    }
}
