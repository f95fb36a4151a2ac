use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Acceptance rate the tuner steers towards for scalar targets.
pub const TARGET_ACCEPTANCE: f64 = 0.44;

/// Proposals per adaptation batch.
pub const DEFAULT_BATCH: u32 = 50;

/// Where a scalar parameter lives. Positive targets are moved on the log
/// scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Real,
    Positive,
}

/// Random-walk scale for one target, adapted in batches while `adapting` is
/// set: after each batch the log scale moves by `±min(0.05, 1/√b)` towards
/// the target acceptance rate, `b` being the batch count.
#[derive(Debug, Clone)]
pub struct AdaptiveTuner {
    log_scale: f64,
    batch: u32,
    batches: u32,
    batch_proposed: u32,
    batch_accepted: u32,
    proposed: u64,
    accepted: u64,
    adapting: bool,
    target: f64,
}

impl AdaptiveTuner {
    pub fn new(scale: f64) -> Self {
        Self {
            log_scale: scale.ln(),
            batch: DEFAULT_BATCH,
            batches: 0,
            batch_proposed: 0,
            batch_accepted: 0,
            proposed: 0,
            accepted: 0,
            adapting: true,
            target: TARGET_ACCEPTANCE,
        }
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target = target;
        self
    }

    pub fn with_batch(mut self, batch: u32) -> Self {
        self.batch = batch.max(1);
        self
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    pub fn is_adapting(&self) -> bool {
        self.adapting
    }

    /// Freezing also resets the acceptance counters so that the reported
    /// rate covers the frozen phase only.
    pub fn set_adapting(&mut self, on: bool) {
        if self.adapting && !on {
            self.proposed = 0;
            self.accepted = 0;
        }
        self.adapting = on;
        self.batch_proposed = 0;
        self.batch_accepted = 0;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return f64::NAN;
        }
        self.accepted as f64 / self.proposed as f64
    }

    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
        if !self.adapting {
            return;
        }
        self.batch_proposed += 1;
        self.batch_accepted += accepted as u32;
        if self.batch_proposed >= self.batch {
            self.batches += 1;
            let delta = 0.05f64.min(1.0 / (self.batches as f64).sqrt());
            let rate = self.batch_accepted as f64 / self.batch_proposed as f64;
            self.log_scale += if rate > self.target { delta } else { -delta };
            self.batch_proposed = 0;
            self.batch_accepted = 0;
        }
    }
}

/// One Metropolis–Hastings step for a scalar with a Gaussian random-walk
/// proposal (on the log scale for positive targets, with the Jacobian in the
/// ratio). Returns the new value and whether the proposal was accepted.
pub fn adaptive_mh_scalar<R: Rng + ?Sized>(
    mut target_logpdf: impl FnMut(f64) -> f64,
    current: f64,
    support: Support,
    tuner: &mut AdaptiveTuner,
    rng: &mut R,
) -> Result<(f64, bool)> {
    let lp = target_logpdf(current);
    let (x, _, acc) = mh_step_cached(&mut target_logpdf, current, lp, support, tuner, rng)?;
    Ok((x, acc))
}

/// As [`adaptive_mh_scalar`] but reuses the log target at `current` and
/// returns the log target at the new value.
pub fn mh_step_cached<R: Rng + ?Sized>(
    target_logpdf: &mut impl FnMut(f64) -> f64,
    current: f64,
    current_lp: f64,
    support: Support,
    tuner: &mut AdaptiveTuner,
    rng: &mut R,
) -> Result<(f64, f64, bool)> {
    if !current_lp.is_finite() {
        return Err(Error::NonFiniteTarget(format!("log target {current_lp} at {current}")));
    }
    let z: f64 = rng.sample(StandardNormal);
    let step = tuner.scale() * z;
    let (prop, log_jac) = match support {
        Support::Real => (current + step, 0.0),
        Support::Positive => {
            let p = current * step.exp();
            (p, step)
        }
    };
    let prop_lp = if support == Support::Positive && !(prop > 0.0 && prop.is_finite()) {
        f64::NEG_INFINITY
    } else {
        target_logpdf(prop)
    };
    let log_ratio = prop_lp - current_lp + log_jac;
    let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    tuner.record(accept);
    if accept && prop_lp.is_finite() {
        Ok((prop, prop_lp, true))
    } else {
        Ok((current, current_lp, false))
    }
}

/// Joint random-walk step for a small vector of positive parameters, each
/// moved on the log scale with a common tuned scale.
pub fn adaptive_mh_positive_block<R: Rng + ?Sized>(
    mut target_logpdf: impl FnMut(&[f64]) -> f64,
    current: &[f64],
    current_lp: f64,
    tuner: &mut AdaptiveTuner,
    rng: &mut R,
) -> Result<(Vec<f64>, f64, bool)> {
    if !current_lp.is_finite() {
        return Err(Error::NonFiniteTarget(format!("log target {current_lp} at {current:?}")));
    }
    let s = tuner.scale();
    let steps: Vec<f64> = current.iter().map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect();
    let prop: Vec<f64> = current.iter().zip(&steps).map(|(x, d)| x * d.exp()).collect();
    let prop_lp = if prop.iter().all(|v| *v > 0.0 && v.is_finite()) {
        target_logpdf(&prop)
    } else {
        f64::NEG_INFINITY
    };
    let log_ratio = prop_lp - current_lp + steps.iter().sum::<f64>();
    let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    tuner.record(accept);
    if accept && prop_lp.is_finite() {
        Ok((prop, prop_lp, true))
    } else {
        Ok((current.to_vec(), current_lp, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scale_moves_by_bounded_steps() {
        let mut t = AdaptiveTuner::new(1.0);
        for _ in 0..50 {
            t.record(true);
        }
        assert!((t.scale().ln() - 0.05).abs() < 1e-12);
        for _ in 0..50 {
            t.record(false);
        }
        assert!(t.scale().ln().abs() < 1e-12);
    }

    #[test]
    fn frozen_tuner_keeps_scale() {
        let mut t = AdaptiveTuner::new(2.0);
        t.set_adapting(false);
        for _ in 0..500 {
            t.record(true);
        }
        assert_eq!(t.scale(), 2.0);
        assert_eq!(t.acceptance_rate(), 1.0);
    }

    #[test]
    fn non_finite_current_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut t = AdaptiveTuner::new(1.0);
        let r = adaptive_mh_scalar(|x| if x > 0.0 { 0.0 } else { f64::NEG_INFINITY }, -1.0, Support::Real, &mut t, &mut rng);
        assert!(matches!(r, Err(Error::NonFiniteTarget(_))));
    }
}
