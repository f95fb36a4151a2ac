use std::fmt;
use std::str::FromStr;

use crate::distributions::log_density;
use crate::error::{Error, Result};
use crate::mcmc::Hyper;

/// Hyperparameters as the sampler moves them: all positive, squared where a
/// square is the natural scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hyperparameter {
    Kappa2,
    Xi2,
    Lambda2,
    Tau,
    Sigma2,
}

impl Hyperparameter {
    pub const ALL: [Hyperparameter; 5] = [Self::Kappa2, Self::Xi2, Self::Lambda2, Self::Tau, Self::Sigma2];

    pub fn name(self) -> &'static str {
        match self {
            Self::Kappa2 => "kappa2",
            Self::Xi2 => "xi2",
            Self::Lambda2 => "lambda2",
            Self::Tau => "tau",
            Self::Sigma2 => "sigma2",
        }
    }

    pub fn get(self, h: &Hyper) -> f64 {
        match self {
            Self::Kappa2 => h.kappa2,
            Self::Xi2 => h.xi2,
            Self::Lambda2 => h.lambda2,
            Self::Tau => h.tau,
            Self::Sigma2 => h.sigma2,
        }
    }

    pub fn set(self, h: &mut Hyper, v: f64) {
        match self {
            Self::Kappa2 => h.kappa2 = v,
            Self::Xi2 => h.xi2 = v,
            Self::Lambda2 => h.lambda2 = v,
            Self::Tau => h.tau = v,
            Self::Sigma2 => h.sigma2 = v,
        }
    }
}

impl FromStr for Hyperparameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|h| h.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown hyperparameter `{s}`")))
    }
}

/// Quantity a prior density is stated on. Each maps to one sampled
/// hyperparameter `v` through `x = f(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorTarget {
    Kappa,
    Kappa2,
    Xi,
    Xi2,
    Lambda,
    Lambda2,
    /// `1/λ`, the Laplace scale when `λ` is a rate.
    LambdaScale,
    /// `1/λ²`.
    LambdaScale2,
    Sigma,
    Sigma2,
    Tau,
}

const TARGETS: [(PriorTarget, &str); 11] = [
    (PriorTarget::Kappa, "kappa"),
    (PriorTarget::Kappa2, "kappa2"),
    (PriorTarget::Xi, "xi"),
    (PriorTarget::Xi2, "xi2"),
    (PriorTarget::Lambda, "lambda"),
    (PriorTarget::Lambda2, "lambda2"),
    (PriorTarget::LambdaScale, "lambda_scale"),
    (PriorTarget::LambdaScale2, "lambda_scale2"),
    (PriorTarget::Sigma, "sigma"),
    (PriorTarget::Sigma2, "sigma2"),
    (PriorTarget::Tau, "tau"),
];

#[derive(Clone, Copy)]
enum Transform {
    Identity,
    Sqrt,
    Inverse,
    InverseSqrt,
}

impl PriorTarget {
    pub fn name(self) -> &'static str {
        TARGETS.iter().find(|(t, _)| *t == self).expect("listed").1
    }

    pub fn parameter(self) -> Hyperparameter {
        use PriorTarget::*;
        match self {
            Kappa | Kappa2 => Hyperparameter::Kappa2,
            Xi | Xi2 => Hyperparameter::Xi2,
            Lambda | Lambda2 | LambdaScale | LambdaScale2 => Hyperparameter::Lambda2,
            Sigma | Sigma2 => Hyperparameter::Sigma2,
            Tau => Hyperparameter::Tau,
        }
    }

    fn transform(self) -> Transform {
        use PriorTarget::*;
        match self {
            Kappa2 | Xi2 | Lambda2 | Sigma2 | Tau => Transform::Identity,
            Kappa | Xi | Lambda | Sigma => Transform::Sqrt,
            LambdaScale2 => Transform::Inverse,
            LambdaScale => Transform::InverseSqrt,
        }
    }

    /// `(x, log |dx/dv|)` for a sampled value `v`.
    pub fn map(self, v: f64) -> (f64, f64) {
        let lv = v.ln();
        match self.transform() {
            Transform::Identity => (v, 0.0),
            Transform::Sqrt => (v.sqrt(), -std::f64::consts::LN_2 - 0.5 * lv),
            Transform::Inverse => (1.0 / v, -2.0 * lv),
            Transform::InverseSqrt => (v.powf(-0.5), -std::f64::consts::LN_2 - 1.5 * lv),
        }
    }
}

impl FromStr for PriorTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TARGETS
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(t, _)| *t)
            .ok_or_else(|| Error::InvalidParams(format!("unknown prior target `{s}`")))
    }
}

/// Density placed on a prior target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorDensity {
    /// Half-normal with standard deviation `sd`.
    HalfNormal { sd: f64 },
    InverseGamma { shape: f64, scale: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl PriorDensity {
    pub fn log_pdf(&self, x: f64) -> f64 {
        let r = match *self {
            Self::HalfNormal { sd } => log_density::half_normal(x, sd),
            Self::InverseGamma { shape, scale } => log_density::inverse_gamma(x, shape, scale),
            Self::Gamma { shape, scale } => log_density::gamma(x, shape, scale),
        };
        r.unwrap_or(f64::NEG_INFINITY)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::HalfNormal { sd } => sd > 0.0 && sd.is_finite(),
            Self::InverseGamma { shape, scale } | Self::Gamma { shape, scale } => {
                shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid prior density {self}")))
        }
    }
}

impl fmt::Display for PriorDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::HalfNormal { sd } => write!(f, "half_normal({sd})"),
            Self::InverseGamma { shape, scale } => write!(f, "inverse_gamma({shape}, {scale})"),
            Self::Gamma { shape, scale } => write!(f, "gamma({shape}, {scale})"),
        }
    }
}

impl FromStr for PriorDensity {
    type Err = Error;

    /// `half_normal(sd)`, `inverse_gamma(shape, scale)` or `gamma(shape, scale)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("cannot parse prior `{s}`"));
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = s[..open].trim();
        let args: Vec<f64> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let d = match (name, args.as_slice()) {
            ("half_normal", [sd]) => Self::HalfNormal { sd: *sd },
            ("inverse_gamma", [a, b]) => Self::InverseGamma { shape: *a, scale: *b },
            ("gamma", [a, b]) => Self::Gamma { shape: *a, scale: *b },
            _ => return Err(bad()),
        };
        d.validate()?;
        Ok(d)
    }
}

/// Prior on one hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperPrior {
    pub target: PriorTarget,
    pub density: PriorDensity,
}

impl HyperPrior {
    pub fn new(target: PriorTarget, density: PriorDensity) -> Result<Self> {
        density.validate()?;
        Ok(Self { target, density })
    }

    pub fn half_normal(target: PriorTarget, sd: f64) -> Self {
        Self {
            target,
            density: PriorDensity::HalfNormal { sd },
        }
    }

    /// Log prior density of the sampled value `v`, Jacobian included.
    pub fn log_pdf(&self, v: f64) -> f64 {
        if !(v > 0.0) || !v.is_finite() {
            return f64::NEG_INFINITY;
        }
        let (x, log_jac) = self.target.map(v);
        self.density.log_pdf(x) + log_jac
    }

    /// Inverse-gamma prior stated directly on the sampled parameter, which
    /// makes variance updates conjugate.
    pub fn conjugate_inverse_gamma(&self) -> Option<(f64, f64)> {
        match (matches!(self.target.transform(), Transform::Identity), self.density) {
            (true, PriorDensity::InverseGamma { shape, scale }) => Some((shape, scale)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        let d: PriorDensity = "half_normal(3.5)".parse().unwrap();
        assert_eq!(d, PriorDensity::HalfNormal { sd: 3.5 });
        let d: PriorDensity = "inverse_gamma(1, 2)".parse().unwrap();
        assert_eq!(d, PriorDensity::InverseGamma { shape: 1.0, scale: 2.0 });
        assert!("half_normal(-1)".parse::<PriorDensity>().is_err());
        assert!("cauchy(1)".parse::<PriorDensity>().is_err());
        assert_eq!("lambda_scale2".parse::<PriorTarget>().unwrap().parameter(), Hyperparameter::Lambda2);
    }
}
