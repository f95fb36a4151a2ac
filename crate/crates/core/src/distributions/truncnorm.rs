use rand::Rng;
use rand_distr::{Exp, StandardNormal, Distribution};

/// Which half-line a truncated normal is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `(0, ∞)`
    Positive,
    /// `(−∞, 0)`
    Negative,
}

/// Normal `N(mean, sd²)` restricted to one side of zero.
pub fn sample_truncnorm<R: Rng + ?Sized>(mean: f64, sd: f64, side: Side, rng: &mut R) -> f64 {
    match side {
        Side::Positive => mean + sd * std_lower_tail(-mean / sd, rng),
        Side::Negative => -(-mean + sd * std_lower_tail(mean / sd, rng)),
    }
}

/// Standard normal conditioned on `z ≥ lo`.
fn std_lower_tail<R: Rng + ?Sized>(lo: f64, rng: &mut R) -> f64 {
    if lo < 0.45 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z >= lo {
                return z;
            }
        }
    }
    // exponential proposal with the optimal rate
    let rate = 0.5 * (lo + (lo * lo + 4.0).sqrt());
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let z = lo + exp.sample(rng);
        let u: f64 = rng.random();
        if u <= (-0.5 * (z - rate) * (z - rate)).exp() {
            return z;
        }
    }
}
