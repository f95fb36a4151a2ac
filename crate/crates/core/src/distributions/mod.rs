//! Random variates and log densities used by the samplers.
//!
//! Conventions: `Laplace(λ)` has density `(λ/2) e^{−λ|x|}` (rate λ, variance
//! `2/λ²`); `Gamma(shape, scale)` has mean `shape·scale`; `InvGauss(μ, s)`
//! has mean `μ` and variance `μ³/s`.

mod gig;
mod noise;
mod truncnorm;

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

pub use gig::{sample_gig, GigParams};
pub use noise::{simulate_laplace_noise, NoiseAtom, NoiseSeriesConfig};
pub use truncnorm::{sample_truncnorm, Side};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Inverse Gaussian variate (Michael, Schucany and Haas). An infinite mean
/// gives the Lévy limit `s / Z²`.
pub fn sample_invgauss<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> Result<f64> {
    if !(mean > 0.0) || !(shape > 0.0) || !shape.is_finite() {
        return Err(Error::InvalidParams(format!("InvGauss(mean={mean}, shape={shape})")));
    }
    let z: f64 = rng.sample(StandardNormal);
    if mean.is_infinite() {
        return Ok(shape / (z * z));
    }
    let r = mean * z * z / (2.0 * shape);
    // μ(1 + r − √(r² + 2r)), rearranged to avoid cancellation
    let x = mean / (1.0 + r + (r * r + 2.0 * r).sqrt());
    let u: f64 = rng.random();
    Ok(if u <= mean / (mean + x) { x } else { mean * mean / x })
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be positive, got {v}")))
    }
}

/// Log densities with parameter checks. Out-of-support points give `−∞`.
pub mod log_density {
    use super::*;

    pub fn normal(x: f64, mean: f64, sd: f64) -> Result<f64> {
        positive("sd", sd)?;
        let z = (x - mean) / sd;
        Ok(-LN_SQRT_2PI - sd.ln() - 0.5 * z * z)
    }

    pub fn laplace(x: f64, lambda: f64) -> Result<f64> {
        positive("lambda", lambda)?;
        Ok((lambda / 2.0).ln() - lambda * x.abs())
    }

    pub fn half_normal(x: f64, scale: f64) -> Result<f64> {
        positive("scale", scale)?;
        if x < 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(LN_2 - LN_SQRT_2PI - scale.ln() - 0.5 * (x / scale).powi(2))
    }

    pub fn gamma(x: f64, shape: f64, scale: f64) -> Result<f64> {
        positive("shape", shape)?;
        positive("scale", scale)?;
        if x <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok((shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln())
    }

    pub fn inverse_gamma(x: f64, shape: f64, scale: f64) -> Result<f64> {
        positive("shape", shape)?;
        positive("scale", scale)?;
        if x <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x)
    }

    pub fn exponential(x: f64, rate: f64) -> Result<f64> {
        positive("rate", rate)?;
        if x < 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(rate.ln() - rate * x)
    }

    pub fn invgauss(x: f64, mean: f64, shape: f64) -> Result<f64> {
        positive("mean", mean)?;
        positive("shape", shape)?;
        if x <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(0.5 * (shape / (2.0 * PI * x.powi(3))).ln() - shape * (x - mean).powi(2) / (2.0 * mean * mean * x))
    }
}

/// Laplace(λ) CDF.
pub fn laplace_cdf(x: f64, lambda: f64) -> f64 {
    if x < 0.0 {
        0.5 * (lambda * x).exp()
    } else {
        1.0 - 0.5 * (-lambda * x).exp()
    }
}

/// Draws `Z | S ~ N(0, S)` with `S ~ Exp(rate λ²/2)`; marginally Laplace(λ).
pub fn sample_laplace_mixture<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    let s = rand_distr::Exp::new(lambda * lambda / 2.0).expect("positive rate").sample(rng);
    s.sqrt() * rng.sample::<f64, _>(StandardNormal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn laplace_at_zero() {
        assert_eq!(log_density::laplace(0.0, 2.0).unwrap(), 0.0);
        assert!(log_density::laplace(0.0, 0.0).is_err());
    }

    #[test]
    fn half_normal_mode_at_zero() {
        let at0 = log_density::half_normal(0.0, 2.0).unwrap();
        for x in [1e-6, 0.1, 1.0, 5.0] {
            assert!(log_density::half_normal(x, 2.0).unwrap() < at0);
        }
        assert_eq!(log_density::half_normal(-1.0, 2.0).unwrap(), f64::NEG_INFINITY);
        assert!(log_density::half_normal(1.0, -2.0).is_err());
    }

    #[test]
    fn domain_errors() {
        assert!(log_density::gamma(1.0, 0.0, 1.0).is_err());
        assert!(log_density::gamma(1.0, 1.0, -1.0).is_err());
        assert!(log_density::exponential(1.0, 0.0).is_err());
        assert!(log_density::normal(1.0, 0.0, 0.0).is_err());
        assert!(sample_invgauss(-1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn invgauss_concentrates_for_large_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let d: Vec<f64> = (0..n).map(|_| sample_invgauss(1.0, 1e4, &mut rng).unwrap()).collect();
        let m = d.iter().sum::<f64>() / n as f64;
        let sd = (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(sd < 0.02, "{sd}");
    }

    #[test]
    fn samplers_are_deterministic_given_seed() {
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (
                sample_gig(GigParams::new(0.7, 1.3, 0.9).unwrap(), &mut rng).unwrap(),
                sample_invgauss(2.0, 3.0, &mut rng).unwrap(),
                sample_truncnorm(0.5, 1.0, Side::Positive, &mut rng),
                sample_laplace_mixture(1.0, &mut rng),
            )
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }
}
