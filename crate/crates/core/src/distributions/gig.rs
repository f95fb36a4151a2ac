//! Generalized inverse Gaussian variates, following Hörmann and Leydold's
//! three-regime ratio-of-uniforms scheme.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};

/// `GIG(p, a, b)` with density `∝ x^{p−1} exp(−(a x + b/x)/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    pub p: f64,
    pub a: f64,
    pub b: f64,
}

impl GigParams {
    pub fn new(p: f64, a: f64, b: f64) -> Result<Self> {
        let ok = p.is_finite()
            && a.is_finite()
            && b.is_finite()
            && a >= 0.0
            && b >= 0.0
            && ((a > 0.0 && b > 0.0) || (a > 0.0 && b == 0.0 && p > 0.0) || (a == 0.0 && b > 0.0 && p < 0.0));
        if !ok {
            return Err(Error::InvalidParams(format!("GIG(p={p}, a={a}, b={b})")));
        }
        Ok(Self { p, a, b })
    }

    /// Unnormalized log density.
    pub fn log_kernel(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.p - 1.0) * x.ln() - 0.5 * (self.a * x + self.b / x)
    }
}

/// Below this `ω = √(ab)` the gamma / inverse-gamma limits are used.
const OMEGA_LIMIT: f64 = 1e-10;

pub fn sample_gig<R: Rng + ?Sized>(params: GigParams, rng: &mut R) -> Result<f64> {
    let GigParams { p, a, b } = GigParams::new(params.p, params.a, params.b)?;
    let omega = (a * b).sqrt();
    if omega < OMEGA_LIMIT && p != 0.0 {
        // x^{p−1} e^{−ax/2} or x^{p−1} e^{−b/(2x)} dominates
        return Ok(if p > 0.0 {
            gamma(p, 2.0 / a, rng)
        } else {
            1.0 / gamma(-p, 2.0 / b, rng)
        });
    }
    let lambda = p.abs();
    let y = if lambda > 1.0 || omega > 1.0 {
        rou_shift(lambda, omega, rng)
    } else if omega >= (0.5f64).min(2.0 / 3.0 * (1.0 - lambda).sqrt()) {
        rou_noshift(lambda, omega, rng)
    } else {
        concave_free(lambda, omega, rng)
    };
    let y = if p < 0.0 { 1.0 / y } else { y };
    Ok(y * (b / a).sqrt())
}

fn gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, scale).expect("positive gamma parameters").sample(rng)
}

/// Mode of `y^{λ−1} exp(−ω(y + 1/y)/2)`.
fn mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        ((lambda - 1.0).hypot(omega) + (lambda - 1.0)) / omega
    } else {
        omega / ((1.0 - lambda).hypot(omega) + (1.0 - lambda))
    }
}

fn rou_shift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    // extrema of (x − xm) √f(x) are roots of a depressed cubic
    let a = -(2.0 * (lambda + 1.0) / omega + xm);
    let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c = xm;
    let pp = b - a * a / 3.0;
    let qq = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let fi = (-qq / (2.0 * (-pp * pp * pp / 27.0).sqrt())).clamp(-1.0, 1.0).acos();
    let fak = 2.0 * (-pp / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * std::f64::consts::PI).cos() - a / 3.0;
    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();
    loop {
        let u = uminus + rng.random::<f64>() * (uplus - uminus);
        let v: f64 = rng.random();
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn rou_noshift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + (lambda + 1.0).hypot(omega)) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * rng.random::<f64>();
        let v: f64 = rng.random();
        let x = u / v;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

/// Rejection from a three-piece hat (constant, power, exponential) for
/// `0 ≤ λ < 1` and small `ω`, where the density is not T-concave.
fn concave_free<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let xm = mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;
    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lambda == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        k2 = (2.0 / omega).powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = a0 + a1 + a2;
    loop {
        let mut v = total * rng.random::<f64>();
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= a1;
                let lo = x0.max(2.0 / omega);
                x = -2.0 / omega * ((-omega / 2.0 * lo).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        let u = rng.random::<f64>() * hx;
        if x > 0.0 && u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_invalid_parameters() {
        assert!(GigParams::new(0.5, -1.0, 1.0).is_err());
        assert!(GigParams::new(-0.5, 1.0, 0.0).is_err());
        assert!(GigParams::new(0.5, 0.0, 1.0).is_err());
        assert!(GigParams::new(f64::NAN, 1.0, 1.0).is_err());
        assert!(GigParams::new(1.0, 2.0, 0.0).is_ok());
    }

    #[test]
    fn gamma_branch_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = GigParams::new(1.0, 2.0, 0.0).unwrap();
        let n = 100_000;
        let m = (0..n).map(|_| sample_gig(p, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn draws_are_positive_in_every_regime() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(p, a, b) in &[(2.5, 1.0, 1.0), (0.3, 2.0, 0.2), (0.0, 0.01, 0.01), (-3.0, 0.5, 4.0), (0.9, 0.5, 0.5)] {
            let g = GigParams::new(p, a, b).unwrap();
            for _ in 0..1000 {
                let x = sample_gig(g, &mut rng).unwrap();
                assert!(x > 0.0 && x.is_finite());
            }
        }
    }
}
