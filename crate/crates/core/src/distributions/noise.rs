use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Truncated series representation of Laplace noise on a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSeriesConfig {
    /// `[x_min, x_max, y_min, y_max]`
    pub domain: [f64; 4],
    /// Number of atoms kept.
    pub terms: usize,
    /// Decay rate `ν` in `Γ_k = e^{−ν γ_k} W_k`.
    pub rate: f64,
}

impl Default for NoiseSeriesConfig {
    fn default() -> Self {
        Self {
            domain: [0.0, 1.0, 0.0, 1.0],
            terms: 1000,
            rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseAtom {
    pub location: [f64; 2],
    pub gamma: f64,
    /// `Γ_k + √Γ_k G_k`
    pub mass: f64,
}

/// Draws the first `terms` atoms of `Σ (Γ_k + √Γ_k G_k) δ_{u_k}` with
/// `γ_k` the arrival times of a unit-rate Poisson process, `W_k`
/// standard exponential, `G_k` standard normal and `u_k` uniform.
pub fn simulate_laplace_noise<R: Rng + ?Sized>(cfg: &NoiseSeriesConfig, rng: &mut R) -> crate::Result<Vec<NoiseAtom>> {
    let [x0, x1, y0, y1] = cfg.domain;
    if !(x1 > x0 && y1 > y0) || cfg.terms == 0 || !(cfg.rate > 0.0) {
        return Err(crate::Error::InvalidParams(format!(
            "noise series needs a rectangle of positive area, at least one term and a positive rate (got {cfg:?})"
        )));
    }
    let mut arrival = 0.0;
    let mut atoms = Vec::with_capacity(cfg.terms);
    for _ in 0..cfg.terms {
        let step: f64 = Exp1.sample(rng);
        arrival += step;
        let w: f64 = Exp1.sample(rng);
        let gamma = (-cfg.rate * arrival).exp() * w;
        let g: f64 = rng.sample(StandardNormal);
        let location = [x0 + (x1 - x0) * rng.random::<f64>(), y0 + (y1 - y0) * rng.random::<f64>()];
        atoms.push(NoiseAtom {
            location,
            gamma,
            mass: gamma + gamma.sqrt() * g,
        });
    }
    Ok(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_atom_inside_domain() {
        let cfg = NoiseSeriesConfig {
            domain: [2.0, 3.0, -1.0, 1.0],
            terms: 1,
            rate: 1.0,
        };
        let atoms = simulate_laplace_noise(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(atoms.len(), 1);
        let [x, y] = atoms[0].location;
        assert!((2.0..3.0).contains(&x) && (-1.0..1.0).contains(&y));
    }

    #[test]
    fn rejects_empty_domain() {
        let cfg = NoiseSeriesConfig {
            domain: [0.0, 0.0, 0.0, 1.0],
            ..Default::default()
        };
        assert!(simulate_laplace_noise(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
