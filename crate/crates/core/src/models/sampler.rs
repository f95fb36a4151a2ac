use std::collections::BTreeMap;

use log::debug;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use super::field::{FieldStructure, KappaTerms};
use super::priors::{HyperPrior, Hyperparameter};
use super::{AuxUpdate, Dataset, Family, ModelSpec, SpatialSupport};
use crate::distributions::{sample_gig, sample_invgauss, sample_truncnorm, GigParams, Side};
use crate::error::{Error, Result};
use crate::fem::{matern_derived, FemMatrices};
use crate::graph::{car_decompose, graph_laplacian};
use crate::mcmc::{
    adaptive_mh_positive_block, color_blocks, factor_checked, mh_step_cached, one_at_a_time_block_update,
    pd_constrained_joint_update, run_chain, AdaptiveTuner, ChainConfig, ChainState, Kernel, NodeLikelihood, PdGuard,
    PosteriorSamples, Support,
};
use crate::sparse::{CholeskySolver, SparseMatrix};
use crate::PriorKind;

/// `b` is floored here when `t_i = 0` leaves a GIG with `p ≤ 0`.
const GIG_B_FLOOR: f64 = 1e-12;

/// Target acceptance for joint two-parameter proposals.
const PAIR_ACCEPTANCE: f64 = 0.35;

/// Fixed quantities of the observation model.
#[derive(Debug, Clone)]
struct Design {
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    log_offset: Vec<f64>,
    a: SparseMatrix,
    at: SparseMatrix,
    ata: SparseMatrix,
    xtx: Vec<Vec<f64>>,
    /// `XᵀA` as dense rows.
    xta: Vec<Vec<f64>>,
}

impl Design {
    fn new(data: &Dataset, spec: &ModelSpec) -> Result<Self> {
        let a = data.observation_matrix(&spec.support)?;
        let at = a.transpose();
        let ata = a.gram(None)?;
        let p = data.n_covariates();
        let n = a.ncols();
        let mut xtx = vec![vec![0.0; p]; p];
        for row in &data.x {
            for i in 0..p {
                for j in 0..p {
                    xtx[i][j] += row[i] * row[j];
                }
            }
        }
        let mut xta = vec![vec![0.0; n]; p];
        for (j, xt) in xta.iter_mut().enumerate() {
            let col: Vec<f64> = data.x.iter().map(|r| r[j]).collect();
            *xt = at.mul_vec(&col);
        }
        let log_offset = match (&data.offset, spec.offset) {
            (Some(o), true) => o.iter().map(|v| v.ln()).collect(),
            _ => vec![0.0; data.n_obs()],
        };
        Ok(Self {
            y: data.y.clone(),
            x: data.x.clone(),
            log_offset,
            a,
            at,
            ata,
            xtx,
            xta,
        })
    }

    fn n_obs(&self) -> usize {
        self.y.len()
    }

    fn p(&self) -> usize {
        self.xtx.len()
    }

    /// `Xβ + Aw + log o (+ ε)`.
    fn linear_predictor(&self, st: &ChainState) -> Vec<f64> {
        let aw = self.a.mul_vec(&st.field);
        (0..self.n_obs())
            .map(|r| {
                let xb: f64 = self.x[r].iter().zip(&st.beta).map(|(a, b)| a * b).sum();
                let e = st.nugget.get(r).copied().unwrap_or(0.0);
                xb + aw[r] + self.log_offset[r] + e
            })
            .collect()
    }
}

/// Observation log density for one record at linear predictor `eta`.
pub(crate) fn obs_log_density(family: Family, y: f64, eta: f64, sigma2: f64) -> f64 {
    match family {
        Family::Gaussian => {
            let r = y - eta;
            -0.5 * (2.0 * std::f64::consts::PI * sigma2).ln() - r * r / (2.0 * sigma2)
        }
        Family::Probit => {
            let n = statrs::distribution::Normal::standard();
            let p = if y == 1.0 { eta } else { -eta };
            statrs::distribution::ContinuousCDF::cdf(&n, p).ln()
        }
        Family::Poisson => y * eta - eta.exp() - ln_gamma(y + 1.0),
    }
}

#[derive(Debug, Clone)]
struct Tuners {
    hyper: BTreeMap<Hyperparameter, AdaptiveTuner>,
    pair: AdaptiveTuner,
    aux: Vec<AdaptiveTuner>,
    field: Vec<AdaptiveTuner>,
    nugget: Vec<AdaptiveTuner>,
    beta: Vec<AdaptiveTuner>,
}

impl Tuners {
    fn all(&mut self) -> impl Iterator<Item = &mut AdaptiveTuner> {
        self.hyper
            .values_mut()
            .chain(std::iter::once(&mut self.pair))
            .chain(self.aux.iter_mut())
            .chain(self.field.iter_mut())
            .chain(self.nugget.iter_mut())
            .chain(self.beta.iter_mut())
    }
}

/// Gibbs/MH kernel for one SGLMM.
#[derive(Debug, Clone)]
pub struct SglmmSampler {
    family: Family,
    prior: PriorKind,
    design: Design,
    field: FieldStructure,
    priors: BTreeMap<Hyperparameter, HyperPrior>,
    fixed: BTreeMap<Hyperparameter, f64>,
    hypers: Vec<Hyperparameter>,
    beta_variance: f64,
    aux_update: AuxUpdate,
    aux_init: Option<f64>,
    init: crate::mcmc::Hyper,
    nugget: bool,
    covariates: Vec<String>,
    intercept: Option<usize>,
    joint_pairs: bool,
    l_solver: CholeskySolver,
    joint_solver: CholeskySolver,
    terms: Option<KappaTerms>,
    tuners: Tuners,
    guard: PdGuard,
    lp: Vec<f64>,
}

impl SglmmSampler {
    pub fn new(spec: &ModelSpec, data: &Dataset) -> Result<Self> {
        spec.validate()?;
        data.validate(spec)?;
        let design = Design::new(data, spec)?;
        let field = match &spec.support {
            SpatialSupport::Mesh { mesh, alpha } => FieldStructure::mesh(&FemMatrices::assemble(mesh)?, *alpha, spec.prior)?,
            SpatialSupport::Graph { graph, k } => FieldStructure::graph(&graph_laplacian(graph), *k, spec.prior)?,
        };
        let n = field.n();
        let hypers = spec.hyperparameters();
        let tuners = Tuners {
            hyper: hypers.iter().map(|&h| (h, AdaptiveTuner::new(0.5))).collect(),
            pair: AdaptiveTuner::new(0.3).with_target(PAIR_ACCEPTANCE),
            aux: vec![AdaptiveTuner::new(1.0); n],
            field: vec![AdaptiveTuner::new(0.5); n],
            nugget: vec![AdaptiveTuner::new(0.5); if spec.nugget { design.n_obs() } else { 0 }],
            beta: vec![AdaptiveTuner::new(0.1); design.p()],
        };
        let intercept = data
            .covariates
            .iter()
            .position(|c| c == "intercept")
            .or_else(|| data.x.first().and_then(|_| (0..data.n_covariates()).find(|&j| data.x.iter().all(|r| r[j] == 1.0))));
        Ok(Self {
            family: spec.family,
            prior: spec.prior,
            joint_pairs: matches!(spec.support, SpatialSupport::Mesh { .. }),
            design,
            field,
            priors: spec.priors.clone(),
            fixed: spec.fixed.clone(),
            hypers,
            beta_variance: spec.beta_variance,
            aux_update: spec.aux_update,
            aux_init: spec.aux_init,
            init: spec.init,
            nugget: spec.nugget && spec.family == Family::Poisson,
            covariates: data.covariates.clone(),
            intercept,
            l_solver: CholeskySolver::default(),
            joint_solver: CholeskySolver::default(),
            terms: None,
            tuners,
            guard: PdGuard::new(spec.retry_cap),
            lp: Vec::new(),
        })
    }

    pub fn field_structure(&self) -> &FieldStructure {
        &self.field
    }

    pub fn guard(&self) -> &PdGuard {
        &self.guard
    }

    pub fn family(&self) -> Family {
        self.family
    }

    fn is_free(&self, h: Hyperparameter) -> bool {
        self.hypers.contains(&h) && !self.fixed.contains_key(&h)
    }

    fn log_prior(&self, h: Hyperparameter, v: f64) -> f64 {
        self.priors[&h].log_pdf(v)
    }

    fn ensure_terms(&mut self, kappa2: f64) -> Result<()> {
        if self.terms.as_ref().is_none_or(|t| t.kappa2 != kappa2) {
            self.terms = Some(self.field.terms(&mut self.l_solver, kappa2)?);
        }
        Ok(())
    }

    fn prior_mean_aux(&self, h: &crate::mcmc::Hyper) -> Vec<f64> {
        if let Some(v) = self.aux_init {
            return vec![v; self.field.n()];
        }
        if self.field.is_graph() {
            vec![2.0 / h.lambda2; self.field.n()]
        } else {
            self.field.mass().iter().map(|c| h.tau * c * h.lambda2).collect()
        }
    }

    /// Prior precision of the field at the current state.
    fn prior_precision(&self, st: &ChainState) -> Result<SparseMatrix> {
        let t = self.terms.as_ref().expect("terms computed");
        match self.prior {
            PriorKind::Grf => Ok(t.op.scale(1.0 / st.hyper.xi2)),
            PriorKind::Lma => self.field.lma_precision(&t.op, &st.aux),
        }
    }

    pub fn log_likelihood(&self, st: &ChainState) -> f64 {
        let eta = self.design.linear_predictor(st);
        eta.iter()
            .zip(&self.design.y)
            .map(|(e, y)| obs_log_density(self.family, *y, *e, st.hyper.sigma2))
            .sum()
    }

    // ---- Gaussian and probit: (β, field) drawn jointly ----

    fn update_z(&self, st: &mut ChainState, rng: &mut ChaCha8Rng) {
        let mut s = st.clone();
        s.z.clear();
        let eta = self.design.linear_predictor(&s);
        for (r, z) in st.z.iter_mut().enumerate() {
            let side = if self.design.y[r] == 1.0 { Side::Positive } else { Side::Negative };
            *z = sample_truncnorm(eta[r], 1.0, side, rng);
        }
    }

    fn conjugate_block(&mut self, st: &mut ChainState, rng: &mut ChaCha8Rng) -> Result<()> {
        let (h, s) = self.joint_rhs(st);
        self.ensure_terms(st.hyper.kappa2)?;

        let lma_moving = self.prior == PriorKind::Lma && self.aux_update != AuxUpdate::Fixed;
        if !lma_moving {
            let prec = self.prior_precision(st)?;
            let (b, f) = joint_draw(&self.design, self.beta_variance, &prec, s, &h, &mut self.joint_solver, rng)?;
            st.beta = b;
            st.field = f;
            return Ok(());
        }

        let terms = self.terms.as_ref().expect("terms computed");
        let t = terms.op.mul_vec(&st.field);
        let hyper = st.hyper;
        let mut bf = (st.beta.clone(), st.field.clone());
        let field = &self.field;
        let design = &self.design;
        let beta_variance = self.beta_variance;
        let aux_update = self.aux_update;
        let aux_tuners = &mut self.tuners.aux;
        let solver = &mut self.joint_solver;
        pd_constrained_joint_update(
            &mut self.guard,
            &mut st.aux,
            &mut bf,
            |aux, rng| propose_aux(field, aux_update, aux, &t, &hyper, aux_tuners, rng),
            |aux, rng| {
                let prec = field.lma_precision(&terms.op, aux)?;
                joint_draw(design, beta_variance, &prec, s, &h, solver, rng)
            },
            rng,
        )?;
        st.beta = bf.0;
        st.field = bf.1;
        Ok(())
    }

    // ---- Poisson: single-site updates ----

    fn poisson_updates(&mut self, st: &mut ChainState, rng: &mut ChaCha8Rng) -> Result<()> {
        self.ensure_terms(st.hyper.kappa2)?;
        self.lp = self.design.linear_predictor(st);
        let prec = self.prior_precision(st)?;
        let car = car_decompose(&prec)?;
        let blocks = color_blocks(&prec);
        let mut nodes = PoissonNodes {
            at: &self.design.at,
            y: &self.design.y,
            lp: &mut self.lp,
            w: st.field.clone(),
        };
        one_at_a_time_block_update(&mut st.field, &car, &blocks, &mut nodes, &mut self.tuners.field, rng)?;

        let y = &self.design.y;
        if self.nugget {
            let s2 = st.hyper.sigma2;
            for r in 0..y.len() {
                let base = self.lp[r] - st.nugget[r];
                let mut target = |e: f64| {
                    let l = base + e;
                    y[r] * l - l.exp() - e * e / (2.0 * s2)
                };
                let cur = st.nugget[r];
                let lp0 = target(cur);
                let (e, _, acc) = mh_step_cached(&mut target, cur, lp0, Support::Real, &mut self.tuners.nugget[r], rng)?;
                if acc {
                    st.nugget[r] = e;
                    self.lp[r] = base + e;
                }
            }
        }

        let bv = self.beta_variance;
        for j in 0..self.design.p() {
            let cur = st.beta[j];
            let xj: Vec<f64> = self.design.x.iter().map(|row| row[j]).collect();
            let lp = &self.lp;
            let mut target = |b: f64| {
                let d = b - cur;
                let ll: f64 = lp
                    .iter()
                    .zip(&xj)
                    .zip(y)
                    .map(|((l, x), yy)| {
                        let v = l + x * d;
                        yy * v - v.exp()
                    })
                    .sum();
                ll - b * b / (2.0 * bv)
            };
            let lp0 = target(cur);
            let (b, _, acc) = mh_step_cached(&mut target, cur, lp0, Support::Real, &mut self.tuners.beta[j], rng)?;
            if acc {
                st.beta[j] = b;
                for (l, x) in self.lp.iter_mut().zip(&xj) {
                    *l += x * (b - cur);
                }
            }
        }
        debug_assert!({
            let fresh = self.design.linear_predictor(st);
            fresh.iter().zip(&self.lp).all(|(a, b)| (a - b).abs() <= 1e-8 * (1.0 + a.abs()))
        });

        if self.prior == PriorKind::Lma && self.aux_update != AuxUpdate::Fixed {
            let t = self.terms.as_ref().expect("terms computed").op.mul_vec(&st.field);
            st.aux = propose_aux(&self.field, self.aux_update, &st.aux, &t, &st.hyper, &mut self.tuners.aux, rng)?;
        }
        Ok(())
    }

    // ---- hyperparameters ----

    /// `(Σ r², n)` for the variance of the unstructured term: Gaussian
    /// residuals or Poisson nuggets.
    fn sigma2_stats(&self, st: &ChainState) -> (f64, usize) {
        match self.family {
            Family::Gaussian => {
                let eta = self.design.linear_predictor(st);
                let ss = eta.iter().zip(&self.design.y).map(|(e, y)| (y - e) * (y - e)).sum();
                (ss, self.design.n_obs())
            }
            _ => (st.nugget.iter().map(|e| e * e).sum(), st.nugget.len()),
        }
    }

    /// Log full conditional of `h` as a function of its value, everything
    /// else held at `st`. `κ²` goes through [`Self::log_conditional`].
    fn conditional(&mut self, h: Hyperparameter, st: &ChainState) -> Result<Box<dyn Fn(f64) -> f64>> {
        let prior = *self
            .priors
            .get(&h)
            .ok_or_else(|| Error::InvalidModel(format!("no prior on {}", h.name())))?;
        let f: Box<dyn Fn(f64) -> f64> = match h {
            Hyperparameter::Kappa2 => {
                return Err(Error::InvalidParams("the kappa2 conditional refactors L".into()));
            }
            Hyperparameter::Sigma2 => {
                let (ss, n) = self.sigma2_stats(st);
                let half_n = n as f64 / 2.0;
                Box::new(move |v| -half_n * v.ln() - ss / (2.0 * v) + prior.log_pdf(v))
            }
            Hyperparameter::Xi2 => {
                self.ensure_terms(st.hyper.kappa2)?;
                let q = self.field.grf_quad(&self.terms.as_ref().expect("terms computed").l, &st.field);
                let half_n = self.field.n() as f64 / 2.0;
                Box::new(move |v| -half_n * v.ln() - q / (2.0 * v) + prior.log_pdf(v))
            }
            Hyperparameter::Lambda2 if self.field.is_graph() => {
                // S_i ~ Exp(rate λ²/2)
                let n = st.aux.len() as f64;
                let sum: f64 = st.aux.iter().sum();
                Box::new(move |v| n * (v / 2.0).ln() - v / 2.0 * sum + prior.log_pdf(v))
            }
            Hyperparameter::Lambda2 => {
                let g = GammaStats::new(self.field.mass(), &st.aux);
                let tau = st.hyper.tau;
                Box::new(move |v| g.log_lik(tau, v) + prior.log_pdf(v))
            }
            Hyperparameter::Tau => {
                let g = GammaStats::new(self.field.mass(), &st.aux);
                let l2 = st.hyper.lambda2;
                Box::new(move |v| g.log_lik(v, l2) + prior.log_pdf(v))
            }
        };
        Ok(f)
    }

    /// Log full conditional of hyperparameter `h` at `v`, up to a constant.
    pub fn log_conditional(&mut self, h: Hyperparameter, v: f64, st: &ChainState) -> Result<f64> {
        if h == Hyperparameter::Kappa2 {
            return Ok(self.field_log_density(v, st.hyper.xi2, st) + self.log_prior(h, v));
        }
        Ok(self.conditional(h, st)?(v))
    }

    fn mh_hyper(&mut self, h: Hyperparameter, st: &mut ChainState, rng: &mut ChaCha8Rng) -> Result<()> {
        let target = self.conditional(h, st)?;
        let mut f = |v: f64| target(v);
        let cur = h.get(&st.hyper);
        let lp0 = f(cur);
        let tuner = self.tuners.hyper.get_mut(&h).expect("tuner");
        h.set(&mut st.hyper, mh_step_cached(&mut f, cur, lp0, Support::Positive, tuner, rng)?.0);
        Ok(())
    }

    fn update_sigma2(&mut self, st: &mut ChainState, rng: &mut ChaCha8Rng) -> Result<()> {
        if !self.is_free(Hyperparameter::Sigma2) {
            return Ok(());
        }
        if let Some((a, b)) = self.priors[&Hyperparameter::Sigma2].conjugate_inverse_gamma() {
            let (ss, n) = self.sigma2_stats(st);
            st.hyper.sigma2 = sample_inverse_gamma(a + n as f64 / 2.0, b + ss / 2.0, rng)?;
            return Ok(());
        }
        self.mh_hyper(Hyperparameter::Sigma2, st, rng)
    }

    /// Field log density terms that vary with `κ²` (and `ξ²` for a GRF).
    fn field_log_density(&mut self, kappa2: f64, xi2: f64, st: &ChainState) -> f64 {
        let l = match self.field.l(kappa2) {
            Ok(l) => l,
            Err(_) => return f64::NEG_INFINITY,
        };
        let ld = match self.l_solver.factor(&l) {
            Ok(f) => f.log_det(),
            Err(_) => return f64::NEG_INFINITY,
        };
        match self.prior {
            PriorKind::Grf => {
                let n = self.field.n() as f64;
                0.5 * self.field.grf_log_det(ld) - 0.5 * n * xi2.ln() - self.field.grf_quad(&l, &st.field) / (2.0 * xi2)
            }
            PriorKind::Lma => {
                let k = match self.field.lma_operator(kappa2) {
                    Ok(k) => k,
                    Err(_) => return f64::NEG_INFINITY,
                };
                let t = k.mul_vec(&st.field);
                let q: f64 = t.iter().zip(&st.aux).map(|(t, v)| t * t / v).sum();
                self.field.lma_log_det(ld) - 0.5 * q
            }
        }
    }

    fn update_field_hypers(&mut self, st: &mut ChainState, rng: &mut ChaCha8Rng) -> Result<()> {
        let k_free = self.is_free(Hyperparameter::Kappa2);
        let x_free = self.is_free(Hyperparameter::Xi2);
        if self.prior == PriorKind::Grf && self.joint_pairs && k_free && x_free {
            let cur = [st.hyper.kappa2, st.hyper.xi2];
            let snapshot = st.clone();
            let mut tuner = self.tuners.pair.clone();
            let mut target = |v: &[f64]| {
                self.field_log_density(v[0], v[1], &snapshot)
                    + self.log_prior(Hyperparameter::Kappa2, v[0])
                    + self.log_prior(Hyperparameter::Xi2, v[1])
            };
            let lp0 = target(&cur);
            let (v, _, _) = adaptive_mh_positive_block(&mut target, &cur, lp0, &mut tuner, rng)?;
            self.tuners.pair = tuner;
            st.hyper.kappa2 = v[0];
            st.hyper.xi2 = v[1];
        } else {
            if k_free {
                let snapshot = st.clone();
                let mut tuner = self.tuners.hyper[&Hyperparameter::Kappa2].clone();
                let mut target = |k2: f64| {
                    self.field_log_density(k2, snapshot.hyper.xi2, &snapshot) + self.log_prior(Hyperparameter::Kappa2, k2)
                };
                let lp0 = target(snapshot.hyper.kappa2);
                st.hyper.kappa2 = mh_step_cached(&mut target, snapshot.hyper.kappa2, lp0, Support::Positive, &mut tuner, rng)?.0;
                self.tuners.hyper.insert(Hyperparameter::Kappa2, tuner);
            }
            if x_free {
                self.mh_hyper(Hyperparameter::Xi2, st, rng)?;
            }
        }
        if self.prior == PriorKind::Lma {
            self.update_lma_scale(st, rng)?;
        }
        Ok(())
    }

    fn update_lma_scale(&mut self, st: &mut ChainState, rng: &mut ChaCha8Rng) -> Result<()> {
        let l_free = self.is_free(Hyperparameter::Lambda2);
        let t_free = self.is_free(Hyperparameter::Tau);
        if self.joint_pairs && l_free && t_free {
            let g = GammaStats::new(self.field.mass(), &st.aux);
            let (pt, pl) = (self.priors[&Hyperparameter::Tau], self.priors[&Hyperparameter::Lambda2]);
            let cur = [st.hyper.tau, st.hyper.lambda2];
            let target = |v: &[f64]| g.log_lik(v[0], v[1]) + pt.log_pdf(v[0]) + pl.log_pdf(v[1]);
            let lp0 = target(&cur);
            let (v, _, _) = adaptive_mh_positive_block(target, &cur, lp0, &mut self.tuners.pair, rng)?;
            st.hyper.tau = v[0];
            st.hyper.lambda2 = v[1];
            return Ok(());
        }
        if t_free {
            self.mh_hyper(Hyperparameter::Tau, st, rng)?;
        }
        if l_free {
            self.mh_hyper(Hyperparameter::Lambda2, st, rng)?;
        }
        Ok(())
    }

    /// Right-hand side `h` of the joint `(β, field)` system and the
    /// likelihood precision `s` (`1/σ²`, or 1 on the probit scale).
    fn joint_rhs(&self, st: &ChainState) -> (Vec<f64>, f64) {
        let (resp, s) = match self.family {
            Family::Probit => (&st.z, 1.0),
            _ => (&self.design.y, 1.0 / st.hyper.sigma2),
        };
        let mut h: Vec<f64> = (0..self.design.p())
            .map(|j| s * self.design.x.iter().zip(resp).map(|(row, r)| row[j] * r).sum::<f64>())
            .collect();
        h.extend(self.design.at.mul_vec(resp).into_iter().map(|v| v * s));
        (h, s)
    }

    /// Mean and precision of `(β, field)` given everything else, for the
    /// Gaussian and probit families.
    pub fn joint_conditional(&mut self, st: &ChainState) -> Result<(Vec<f64>, SparseMatrix)> {
        if self.family == Family::Poisson {
            return Err(Error::InvalidModel("the Poisson family has no conjugate (beta, field) block".into()));
        }
        let (h, s) = self.joint_rhs(st);
        self.ensure_terms(st.hyper.kappa2)?;
        let prec = self.prior_precision(st)?;
        let p = joint_precision(&self.design, self.beta_variance, &prec, s)?;
        let mean = factor_checked(&mut self.joint_solver, &p)?.solve(&h)?;
        Ok((mean, p))
    }
}

/// `Γ_i ~ Gamma(τC_ii, scale λ²)` log likelihood in `(τ, λ²)`.
struct GammaStats {
    c: Vec<f64>,
    log_g: Vec<f64>,
    sum_g: f64,
    sum_c: f64,
}

impl GammaStats {
    fn new(c: &[f64], aux: &[f64]) -> Self {
        Self {
            c: c.to_vec(),
            log_g: aux.iter().map(|g| g.ln()).collect(),
            sum_g: aux.iter().sum(),
            sum_c: c.iter().sum(),
        }
    }

    fn log_lik(&self, tau: f64, l2: f64) -> f64 {
        let mut s = -self.sum_g / l2 - tau * self.sum_c * l2.ln();
        for (ci, lg) in self.c.iter().zip(&self.log_g) {
            let a = tau * ci;
            s += (a - 1.0) * lg - ln_gamma(a);
        }
        s
    }
}

/// `P = [[I/σ²_β + s XᵀX, s XᵀA], [s AᵀX, Q + s AᵀA]]`.
fn joint_precision(design: &Design, beta_variance: f64, field_prec: &SparseMatrix, s: f64) -> Result<SparseMatrix> {
    let p = design.p();
    let n = field_prec.ncols();
    let mut t = Vec::with_capacity(p * p + 2 * p * n + field_prec.nnz() + design.ata.nnz());
    for i in 0..p {
        for j in 0..p {
            let v = s * design.xtx[i][j] + if i == j { 1.0 / beta_variance } else { 0.0 };
            t.push((i, j, v));
        }
        for (j, &v) in design.xta[i].iter().enumerate() {
            if v != 0.0 {
                t.push((i, p + j, s * v));
                t.push((p + j, i, s * v));
            }
        }
    }
    t.extend(field_prec.triplets().map(|(i, j, v)| (p + i, p + j, v)));
    t.extend(design.ata.triplets().map(|(i, j, v)| (p + i, p + j, s * v)));
    SparseMatrix::from_triplets(p + n, p + n, &t)?.symmetrize()
}

/// `(β, w) ~ N(P⁻¹h, P⁻¹)`.
fn joint_draw<R: Rng + ?Sized>(
    design: &Design,
    beta_variance: f64,
    field_prec: &SparseMatrix,
    s: f64,
    h: &[f64],
    solver: &mut CholeskySolver,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = joint_precision(design, beta_variance, field_prec, s)?;
    let f = factor_checked(solver, &m)?;
    let mut x = f.sample_gaussian_precision(h, rng)?;
    let w = x.split_off(design.p());
    Ok((x, w))
}

/// Candidate auxiliaries given `t = K w`.
fn propose_aux<R: Rng + ?Sized>(
    field: &FieldStructure,
    mode: AuxUpdate,
    aux: &[f64],
    t: &[f64],
    h: &crate::mcmc::Hyper,
    tuners: &mut [AdaptiveTuner],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if mode == AuxUpdate::Fixed {
        return Ok(aux.to_vec());
    }
    if field.is_graph() {
        // S_i⁻¹ | t_i ~ InvGauss(√(λ²/t_i²), λ²)
        let lambda = h.lambda2.sqrt();
        return t
            .iter()
            .map(|&ti| {
                let mean = if ti == 0.0 { f64::INFINITY } else { lambda / ti.abs() };
                Ok(1.0 / sample_invgauss(mean, h.lambda2, rng)?)
            })
            .collect();
    }
    let c = field.mass();
    match mode {
        AuxUpdate::Gibbs => t
            .iter()
            .zip(c)
            .map(|(&ti, &ci)| {
                let p = h.tau * ci - 0.5;
                let mut b = ti * ti;
                if b == 0.0 && p <= 0.0 {
                    debug!("t_i = 0 with GIG p = {p}; flooring b at {GIG_B_FLOOR:e}");
                    b = GIG_B_FLOOR;
                }
                sample_gig(GigParams::new(p, 2.0 / h.lambda2, b)?, rng)
            })
            .collect(),
        _ => {
            let mut out = aux.to_vec();
            for i in 0..out.len() {
                let shape = h.tau * c[i];
                let t2 = t[i] * t[i];
                let mut target = |g: f64| (shape - 1.5) * g.ln() - g / h.lambda2 - t2 / (2.0 * g);
                let lp0 = target(out[i]);
                out[i] = mh_step_cached(&mut target, out[i], lp0, Support::Positive, &mut tuners[i], rng)?.0;
            }
            Ok(out)
        }
    }
}

fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / scale).map_err(|e| Error::InvalidParams(format!("inverse gamma: {e}")))?;
    Ok(1.0 / g.sample(rng))
}

/// Poisson likelihood seen from one field node.
struct PoissonNodes<'a> {
    at: &'a SparseMatrix,
    y: &'a [f64],
    lp: &'a mut Vec<f64>,
    w: Vec<f64>,
}

impl NodeLikelihood for PoissonNodes<'_> {
    fn node_log_lik(&self, i: usize, value: f64) -> f64 {
        let d = value - self.w[i];
        self.at
            .col(i)
            .map(|(r, a)| {
                let l = self.lp[r] + a * d;
                self.y[r] * l - l.exp()
            })
            .sum()
    }

    fn node_changed(&mut self, i: usize, old: f64, new: f64) {
        for (r, a) in self.at.col(i) {
            self.lp[r] += a * (new - old);
        }
        self.w[i] = new;
    }
}

impl Kernel for SglmmSampler {
    fn parameter_names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.covariates.iter().map(|c| format!("beta_{c}")).collect();
        v.extend(self.hypers.iter().map(|h| h.name().to_string()));
        v
    }

    fn derived_names(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.intercept.is_some() {
            v.push("intercept_plus_mean_field".to_string());
        }
        v.push("kappa".to_string());
        match (self.prior, self.field.is_graph()) {
            (PriorKind::Grf, false) => v.extend(["phi2".to_string(), "range".to_string()]),
            (PriorKind::Lma, true) => v.push("lambda_scale".to_string()),
            _ => {}
        }
        v
    }

    fn record_derived(&self, st: &ChainState, out: &mut Vec<f64>) {
        if let Some(j) = self.intercept {
            let m = st.field.iter().sum::<f64>() / st.field.len() as f64;
            out.push(st.beta[j] + m);
        }
        let kappa = st.hyper.kappa2.sqrt();
        out.push(kappa);
        match (self.prior, self.field.is_graph()) {
            (PriorKind::Grf, false) => {
                let nu = self.field.alpha() as f64 - 1.0;
                let (phi2, rho) = matern_derived(st.hyper.xi2.sqrt(), kappa, nu, 2);
                out.extend([phi2, rho]);
            }
            (PriorKind::Lma, true) => out.push(1.0 / st.hyper.lambda2.sqrt()),
            _ => {}
        }
    }

    fn initial_state(&mut self, rng: &mut ChaCha8Rng) -> Result<ChainState> {
        let mut hyper = self.init;
        for (h, v) in &self.fixed {
            h.set(&mut hyper, *v);
        }
        let n = self.field.n();
        let mut st = ChainState {
            beta: vec![0.0; self.design.p()],
            field: vec![0.0; n],
            nugget: vec![0.0; if self.nugget { self.design.n_obs() } else { 0 }],
            aux: if self.prior == PriorKind::Lma { self.prior_mean_aux(&hyper) } else { Vec::new() },
            hyper,
            z: Vec::new(),
            log_lik: 0.0,
        };
        if self.family == Family::Probit {
            st.z = vec![0.0; self.design.n_obs()];
            self.update_z(&mut st, rng);
        }
        st.log_lik = self.log_likelihood(&st);
        Ok(st)
    }

    fn sweep(&mut self, st: &mut ChainState, rng: &mut ChaCha8Rng) -> Result<()> {
        match self.family {
            Family::Gaussian => {
                self.conjugate_block(st, rng)?;
                self.update_sigma2(st, rng)?;
            }
            Family::Probit => {
                self.update_z(st, rng);
                self.conjugate_block(st, rng)?;
            }
            Family::Poisson => {
                self.poisson_updates(st, rng)?;
                self.update_sigma2(st, rng)?;
            }
        }
        self.update_field_hypers(st, rng)?;
        st.log_lik = self.log_likelihood(st);
        if !st.log_lik.is_finite() {
            return Err(Error::NonFiniteTarget(format!("log-likelihood {}", st.log_lik)));
        }
        Ok(())
    }

    fn record(&self, st: &ChainState, out: &mut Vec<f64>) {
        out.extend_from_slice(&st.beta);
        out.extend(self.hypers.iter().map(|h| h.get(&st.hyper)));
    }

    fn set_adapting(&mut self, on: bool) {
        for t in self.tuners.all() {
            t.set_adapting(on);
        }
    }

    fn pd_events(&self) -> u64 {
        self.guard.events
    }
}

/// Builds the sampler for `spec` and runs one chain.
pub fn fit(
    spec: &ModelSpec,
    data: &Dataset,
    cfg: &ChainConfig,
    on_store: Option<&mut dyn FnMut(&ChainState) -> Result<()>>,
) -> Result<(PosteriorSamples, SglmmSampler)> {
    let mut k = SglmmSampler::new(spec, data)?;
    let s = run_chain(&mut k, cfg, on_store)?;
    Ok((s, k))
}
