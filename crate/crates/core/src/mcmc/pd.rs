use log::{debug, warn};
use rand::Rng;

use crate::error::{Error, Result};
use crate::sparse::{CholeskyFactor, CholeskySolver, SparseMatrix};

/// Default number of auxiliary proposals tried per sweep before the current
/// state is kept.
pub const DEFAULT_RETRY_CAP: usize = 25;

/// Largest/smallest pivot ratio beyond which a factored precision is treated
/// as numerically rank-deficient.
pub const MAX_PIVOT_RATIO: f64 = 1.0 / f64::EPSILON;

/// Factors `m` and applies the numerical rank check. A failed factorization
/// and an ill-conditioned factor both come back as `NotPositiveDefinite`.
pub fn factor_checked(solver: &mut CholeskySolver, m: &SparseMatrix) -> Result<CholeskyFactor> {
    let f = solver.factor(m)?;
    let d = f.diagonal();
    let (mut lo, mut hi, mut lo_at) = (f64::INFINITY, 0.0f64, 0);
    for (k, v) in d.iter().enumerate() {
        let p = v * v;
        if p < lo {
            lo = p;
            lo_at = k;
        }
        hi = hi.max(p);
    }
    if !(hi / lo < MAX_PIVOT_RATIO) {
        return Err(Error::NotPositiveDefinite {
            index: f.permutation()[lo_at],
            pivot: lo,
        });
    }
    Ok(f)
}

/// Bookkeeping for the rank-deficiency rejections.
#[derive(Debug, Clone)]
pub struct PdGuard {
    pub retry_cap: usize,
    /// Rejected proposals, one per failed factorization.
    pub events: u64,
    /// Sweeps in which every retry failed and the state was kept.
    pub exhausted: u64,
}

impl Default for PdGuard {
    fn default() -> Self {
        Self::new(DEFAULT_RETRY_CAP)
    }
}

impl PdGuard {
    pub fn new(retry_cap: usize) -> Self {
        Self {
            retry_cap: retry_cap.max(1),
            events: 0,
            exhausted: 0,
        }
    }
}

/// Result of one constrained update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdOutcome {
    /// New auxiliaries and field accepted after `attempts` proposals.
    Accepted { attempts: usize },
    /// Every proposal hit a rank-deficient precision; state unchanged.
    Retained,
}

/// Joint update of auxiliaries and the field they scale. `propose` returns
/// candidate auxiliaries given the current ones; `draw` assembles the field
/// precision from a candidate, factors it and draws the field, reporting
/// `NotPositiveDefinite` when the precision is numerically rank-deficient.
/// Such candidates are rejected and counted, and a fresh candidate is drawn,
/// up to the guard's retry cap; after that the current `(aux, field)` stay.
pub fn pd_constrained_joint_update<R, P, D, F>(
    guard: &mut PdGuard,
    aux: &mut Vec<f64>,
    field: &mut F,
    mut propose: P,
    mut draw: D,
    rng: &mut R,
) -> Result<PdOutcome>
where
    R: Rng + ?Sized,
    P: FnMut(&[f64], &mut R) -> Result<Vec<f64>>,
    D: FnMut(&[f64], &mut R) -> Result<F>,
{
    for attempt in 1..=guard.retry_cap {
        let candidate = propose(aux, rng)?;
        match draw(&candidate, rng) {
            Ok(f) => {
                *aux = candidate;
                *field = f;
                return Ok(PdOutcome::Accepted { attempts: attempt });
            }
            Err(Error::NotPositiveDefinite { index, pivot }) => {
                guard.events += 1;
                debug!("rank-deficient precision (pivot {pivot:e} at {index}), attempt {attempt}");
            }
            Err(e) => return Err(e),
        }
    }
    guard.exhausted += 1;
    warn!("{} consecutive rank-deficient proposals; keeping the current state", guard.retry_cap);
    Ok(PdOutcome::Retained)
}
