//! Adaptive Metropolis-within-Gibbs sampler for the structural parameters.
//!
//! Blocks per iteration: the reduced-form coefficients as one random walk;
//! the free entries of B (plus proxy loadings and noise scales in the
//! augmented model) as one random walk; `(λ_i, ln(q_i − 2.1))` per shock; exact
//! Gibbs updates for the exogeneity means and their hyper-variances.
//!
//! RNG streams: a chain draws from `ChaCha8Rng::seed_from_u64(seed)` with
//! `set_stream(stream)`, so chains sharing a master seed but with distinct
//! stream ids are independent.

pub mod adapt;
pub mod first_step;
pub mod gibbs;
pub mod labeling;
pub(crate) mod model;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::likelihood::{ExogeneityMeans, ProxySet};
use crate::proxy::{build_augmented, AugmentedConfig, ProxyBlock};
use crate::shocks::{SkewTParams, LAMBDA_BOUNDS, Q_BOUNDS};
use crate::var::{
    fit_ols, is_stable, regressors, DeterministicDesign, ReducedFormVar, TimeSeriesPanel, VarSpec,
    DEFAULT_STABILITY_TOL,
};

use adapt::{robust_cholesky, RandomWalkBlock};
use first_step::{label_first_step, mode_search, FirstStep, FirstStepOptions};
use labeling::{align_to_reference, dominance_holds, labeling_matrix, proxy_label_shocks};
use model::{Evaluator, FreeLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Skewed-t shocks, proxies enter through the re-weighting with estimated means.
    NonGaussianWeighting,
    /// Skewed-t shocks, proxies unused (except for labeling).
    NonGaussian,
    /// Gaussian shocks with the exogenous re-weighting (μ = 0).
    GaussianWeighting,
    /// Gaussian SVAR augmented with the proxy equations.
    GaussianAugmented,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::NonGaussianWeighting,
        Variant::NonGaussian,
        Variant::GaussianWeighting,
        Variant::GaussianAugmented,
    ];

    pub fn is_gaussian(self) -> bool {
        matches!(self, Variant::GaussianWeighting | Variant::GaussianAugmented)
    }

    pub fn weights_proxies(self) -> bool {
        matches!(self, Variant::NonGaussianWeighting | Variant::GaussianWeighting)
    }

    pub fn estimates_exogeneity(self) -> bool {
        self == Variant::NonGaussianWeighting
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::NonGaussianWeighting => "ng-weighting",
            Variant::NonGaussian => "ng",
            Variant::GaussianWeighting => "gaussian-weighting",
            Variant::GaussianAugmented => "gaussian-augmented",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.label() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown variant `{s}`")))
    }
}

/// How structural shocks are kept labeled along the chain.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelingMode {
    /// Dominance rule against the labeled first-step estimate.
    FirstStep,
    /// Dominance rule against a given matrix.
    Reference(DMatrix<f64>),
    /// Every state must be labeled as itself by the proxy-correlation rule.
    ProxyCorrelation,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub variant: Variant,
    pub var: VarSpec,
    /// `(row, col)` entries of B fixed at zero.
    pub zero_restrictions: Vec<(usize, usize)>,
    pub labeling: LabelingMode,
    /// Inverse-gamma hyperprior `IG(a, b)` on the exogeneity hyper-variances.
    pub ig_a: f64,
    pub ig_b: f64,
    /// Keep each hyper-variance at its starting value instead of drawing it.
    pub freeze_hyper_variance: bool,
    pub augmented: AugmentedConfig,
}

impl ModelSpec {
    pub fn new(variant: Variant, var: VarSpec) -> Self {
        Self {
            variant,
            var,
            zero_restrictions: Vec::new(),
            labeling: LabelingMode::FirstStep,
            ig_a: 0.0,
            ig_b: 0.0,
            freeze_hyper_variance: false,
            augmented: AugmentedConfig::default(),
        }
    }

    pub fn validate(&self, nvars: usize, proxies: &ProxySet) -> Result<()> {
        let k = proxies.nproxies();
        if !self.variant.is_gaussian() && nvars < 2 {
            return Err(Error::InvalidInput("non-Gaussian identification needs at least two variables".into()));
        }
        match self.variant {
            Variant::GaussianAugmented if k == 0 => {
                return Err(Error::InvalidInput("the augmented model needs at least one proxy".into()))
            }
            Variant::GaussianWeighting if k == 0 && self.zero_restrictions.is_empty() => {
                return Err(Error::InvalidInput(
                    "a Gaussian model needs proxies or zero restrictions for identification".into(),
                ))
            }
            _ => {}
        }
        if self.variant.weights_proxies() && k == 0 && !self.variant.is_gaussian() {
            return Err(Error::InvalidInput("proxy weighting needs at least one proxy".into()));
        }
        for (i, &(r, c)) in self.zero_restrictions.iter().enumerate() {
            if r >= nvars || c >= nvars {
                return Err(Error::InvalidInput(format!("zero restriction ({r}, {c}) outside a {nvars}×{nvars} B")));
            }
            if self.zero_restrictions[..i].contains(&(r, c)) {
                return Err(Error::InvalidInput(format!("zero restriction ({r}, {c}) listed twice")));
            }
        }
        if !(self.ig_a >= 0.0 && self.ig_b >= 0.0 && self.ig_a.is_finite() && self.ig_b.is_finite()) {
            return Err(Error::Domain("IG hyperparameters must be finite and non-negative".into()));
        }
        match &self.labeling {
            LabelingMode::ProxyCorrelation if k == 0 => {
                return Err(Error::InvalidInput("proxy-correlation labeling needs a proxy".into()))
            }
            LabelingMode::Reference(r) if r.shape() != (nvars, nvars) => {
                return Err(Error::DimensionMismatch("reference matrix has the wrong shape".into()))
            }
            _ => {}
        }
        if proxies.targets().iter().any(|&t| t >= nvars) {
            return Err(Error::InvalidInput("proxy target outside the shock range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// Total iterations, burn-in included.
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub stream: u64,
    /// Initial multipliers on the proposal scales.
    pub pi_scale: f64,
    pub b_scale: f64,
    pub shape_scale: f64,
    pub adapt_window: usize,
    pub target_accept: f64,
    /// Reject reduced-form proposals whose companion matrix is not stable.
    pub reject_unstable: bool,
    pub first_step: FirstStepOptions,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            draws: 4000,
            burn_in: 2000,
            thin: 1,
            seed: 0,
            stream: 0,
            pi_scale: 1.0,
            b_scale: 1.0,
            shape_scale: 1.0,
            adapt_window: 100,
            target_accept: 0.25,
            reject_unstable: false,
            first_step: FirstStepOptions::default(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws <= self.burn_in {
            return Err(Error::InvalidInput(format!(
                "draws ({}) must exceed burn-in ({})",
                self.draws, self.burn_in
            )));
        }
        if self.thin == 0 || self.adapt_window == 0 {
            return Err(Error::InvalidInput("thinning and adaptation window must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidInput("target acceptance must lie in (0, 1)".into()));
        }
        for s in [self.pi_scale, self.b_scale, self.shape_scale] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidInput("proposal scales must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        (self.draws - self.burn_in).div_ceil(self.thin)
    }
}

/// One retained state of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraw {
    pub iteration: usize,
    pub var: ReducedFormVar,
    pub b: DMatrix<f64>,
    pub lambda: Vec<f64>,
    pub q: Vec<f64>,
    pub exogeneity: ExogeneityMeans,
    pub block: ProxyBlock,
    pub log_posterior: f64,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub draws: Vec<PosteriorDraw>,
    /// Acceptance rate per Metropolis block over the whole run.
    pub acceptance: Vec<(String, f64)>,
    /// Mode used to start the chain (after labeling).
    pub first_step: FirstStep,
    /// Matrix the dominance rule is checked against, if any.
    pub reference: Option<DMatrix<f64>>,
    pub warnings: Vec<String>,
}

struct Parts {
    e: DMatrix<f64>,
    col_ll: Vec<f64>,
    lik: f64,
    moments: DMatrix<f64>,
    rw: f64,
}

struct State {
    pi: Vec<f64>,
    u: DMatrix<f64>,
    b: DMatrix<f64>,
    binv_t: DMatrix<f64>,
    logdet: f64,
    shocks: Vec<SkewTParams>,
    block: ProxyBlock,
    mu: ExogeneityMeans,
    parts: Parts,
}

struct Chain<'a> {
    spec: &'a ModelSpec,
    cfg: &'a ChainConfig,
    y: &'a DMatrix<f64>,
    x: DMatrix<f64>,
    eval: Evaluator,
    layout: FreeLayout,
    ref_inv: Option<DMatrix<f64>>,
    n: usize,
    nterms: usize,
}

impl Chain<'_> {
    fn nongaussian(&self) -> bool {
        !self.spec.variant.is_gaussian()
    }

    fn augmented(&self) -> bool {
        self.spec.variant == Variant::GaussianAugmented
    }

    fn parts(&self, e: DMatrix<f64>, logdet: f64, shocks: &[SkewTParams], block: &ProxyBlock, mu: &ExogeneityMeans) -> Option<Parts> {
        let col_ll = if self.nongaussian() {
            Evaluator::column_ll(&e, shocks)
        } else {
            Vec::new()
        };
        let lik = self.eval.likelihood(&e, logdet, &col_ll, block);
        let moments = self.eval.moments(&e);
        let rw = self.eval.reweight(&moments, mu);
        (lik.is_finite() && rw.is_finite()).then_some(Parts {
            e,
            col_ll,
            lik,
            moments,
            rw,
        })
    }

    fn log_prior_mu(&self, mu: &ExogeneityMeans) -> f64 {
        if !self.spec.variant.estimates_exogeneity() {
            return 0.0;
        }
        let mut total = 0.0;
        for (k, j) in self.eval.proxies.non_target_pairs(self.n) {
            let (m, s2) = (mu.mu()[(k, j)], mu.sigma2()[(k, j)]);
            total += -0.5 * (2.0 * std::f64::consts::PI * s2).ln() - 0.5 * m * m / s2;
            if !self.spec.freeze_hyper_variance {
                total += gibbs::ln_inverse_gamma_kernel(s2, self.spec.ig_a, self.spec.ig_b);
            }
        }
        total
    }

    fn log_posterior(&self, s: &State) -> f64 {
        s.parts.lik + s.parts.rw + self.log_prior_mu(&s.mu)
    }

    fn labeled(&self, b: &DMatrix<f64>, e: &DMatrix<f64>) -> bool {
        match &self.spec.labeling {
            LabelingMode::FirstStep | LabelingMode::Reference(_) => match &self.ref_inv {
                Some(r) => dominance_holds(&labeling_matrix(b, r)),
                None => true,
            },
            LabelingMode::ProxyCorrelation => {
                let targets = self.eval.proxies.targets();
                let signs_ok = (0..self.n).all(|j| targets.contains(&j) || b[(j, j)] > 0.0);
                signs_ok && proxy_label_shocks(e, &self.eval.proxies).is_ok_and(|l| l.is_identity())
            }
            LabelingMode::None => true,
        }
    }

    fn structural_vec(&self, b: &DMatrix<f64>, block: &ProxyBlock) -> Vec<f64> {
        let mut v = self.layout.to_vec(b);
        if self.augmented() {
            v.extend(&block.loadings);
            if self.spec.augmented.estimate_noise_scale {
                v.extend(&block.log_noise_scale);
            }
        }
        v
    }

    fn structural_decode(&self, v: &[f64], block: &ProxyBlock) -> (DMatrix<f64>, ProxyBlock) {
        let nb = self.layout.len();
        let b = self.layout.to_matrix(&v[..nb]);
        let mut blk = block.clone();
        if self.augmented() {
            let k = blk.loadings.len();
            blk.loadings.copy_from_slice(&v[nb..nb + k]);
            if self.spec.augmented.estimate_noise_scale {
                blk.log_noise_scale.copy_from_slice(&v[nb + k..nb + 2 * k]);
            }
        }
        (b, blk)
    }

    /// Log posterior as a function of the structural block only.
    fn structural_value(&self, s: &State, v: &[f64]) -> f64 {
        let (b, blk) = self.structural_decode(v, &s.block);
        let Some((e, logdet)) = self.eval.innovations(&s.u, &b) else {
            return f64::NEG_INFINITY;
        };
        match self.parts(e, logdet, &s.shocks, &blk, &s.mu) {
            Some(p) => p.lik + p.rw,
            None => f64::NEG_INFINITY,
        }
    }

    fn pi_matrix(&self, pi: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.x.ncols(), self.n, pi)
    }

    fn step_pi<R: Rng>(&self, s: &mut State, blk: &mut RandomWalkBlock, rng: &mut R) {
        let prop = blk.propose(&s.pi, rng);
        let pim = self.pi_matrix(&prop);
        let mut ok = true;
        if self.cfg.reject_unstable {
            ok = ReducedFormVar::from_stacked(&pim, self.n, self.spec.var, self.nterms)
                .map(|v| is_stable(&v, DEFAULT_STABILITY_TOL).stable)
                .unwrap_or(false);
        }
        let mut accepted = false;
        if ok {
            let u = self.y - &self.x * pim;
            let e = &u * &s.binv_t;
            if let Some(p) = self.parts(e, s.logdet, &s.shocks, &s.block, &s.mu) {
                let log_ratio = p.lik + p.rw - s.parts.lik - s.parts.rw;
                if self.labeled(&s.b, &p.e) && accept(log_ratio, rng) {
                    s.pi = prop;
                    s.u = u;
                    s.parts = p;
                    accepted = true;
                }
            }
        }
        blk.record(accepted);
    }

    fn step_structural<R: Rng>(&self, s: &mut State, blk: &mut RandomWalkBlock, rng: &mut R) {
        let cur = self.structural_vec(&s.b, &s.block);
        let prop = blk.propose(&cur, rng);
        let (b, block) = self.structural_decode(&prop, &s.block);
        let mut accepted = false;
        if let Some((e, logdet)) = self.eval.innovations(&s.u, &b) {
            if let Some(p) = self.parts(e, logdet, &s.shocks, &block, &s.mu) {
                let log_ratio = p.lik + p.rw - s.parts.lik - s.parts.rw;
                if self.labeled(&b, &p.e) && accept(log_ratio, rng) {
                    s.binv_t = b.clone().try_inverse().expect("checked invertible").transpose();
                    s.b = b;
                    s.logdet = logdet;
                    s.block = block;
                    s.parts = p;
                    accepted = true;
                }
            }
        }
        blk.record(accepted);
    }

    fn step_shape<R: Rng>(&self, s: &mut State, i: usize, blk: &mut RandomWalkBlock, rng: &mut R) {
        let cur = shape_coords(&s.shocks[i]);
        let prop = blk.propose(&cur, rng);
        let (lambda, q) = (prop[0], Q_BOUNDS.0 + prop[1].exp());
        let in_bounds = (LAMBDA_BOUNDS.0..=LAMBDA_BOUNDS.1).contains(&lambda) && (Q_BOUNDS.0..=Q_BOUNDS.1).contains(&q);
        let mut accepted = false;
        if in_bounds {
            let p = SkewTParams::new(lambda, q).expect("inside bounds");
            let ll = Evaluator::column_ll_one(&s.parts.e, i, &p);
            // Flat prior on q; the log-distance to the lower bound is sampled.
            let log_ratio = ll - s.parts.col_ll[i] + prop[1] - cur[1];
            if ll.is_finite() && accept(log_ratio, rng) {
                s.parts.lik += ll - s.parts.col_ll[i];
                s.parts.col_ll[i] = ll;
                s.shocks[i] = p;
                accepted = true;
            }
        }
        blk.record(accepted);
    }

    fn step_exogeneity<R: Rng>(&self, s: &mut State, rng: &mut R) {
        let t = self.eval.t as f64;
        for (k, j) in self.eval.proxies.non_target_pairs(self.n) {
            let m = s.parts.moments[(k, j)];
            let v = self.eval.proxies.variance()[k] / t;
            let mu = gibbs::draw_mu(m, v, s.mu.sigma2()[(k, j)], rng);
            let sigma2 = if self.spec.freeze_hyper_variance {
                s.mu.sigma2()[(k, j)]
            } else {
                gibbs::draw_sigma2(mu, self.spec.ig_a, self.spec.ig_b, rng)
            };
            s.mu.set(k, j, mu, sigma2);
        }
        s.parts.rw = self.eval.reweight(&s.parts.moments, &s.mu);
    }

    fn snapshot(&self, s: &State, iteration: usize) -> Result<PosteriorDraw> {
        let var = ReducedFormVar::from_stacked(&self.pi_matrix(&s.pi), self.n, self.spec.var, self.nterms)?;
        Ok(PosteriorDraw {
            iteration,
            var,
            b: s.b.clone(),
            lambda: s.shocks.iter().map(|p| p.lambda()).collect(),
            q: s.shocks.iter().map(|p| p.q()).collect(),
            exogeneity: s.mu.clone(),
            block: s.block.clone(),
            log_posterior: self.log_posterior(s),
        })
    }
}

fn shape_coords(p: &SkewTParams) -> [f64; 2] {
    [p.lambda(), (p.q() - Q_BOUNDS.0).max(1e-12).ln()]
}

fn accept<R: Rng>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    u.ln() < log_ratio
}

/// Central-difference Hessian.
fn numerical_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let mut p = x.to_vec();
    let eval = |p: &mut Vec<f64>, i: usize, si: f64, j: usize, sj: f64| {
        p[i] += si * h[i];
        p[j] += sj * h[j];
        let v = f(p);
        p[i] -= si * h[i];
        p[j] -= sj * h[j];
        v
    };
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = (eval(&mut p, i, 1.0, j, 1.0) - eval(&mut p, i, 1.0, j, -1.0) - eval(&mut p, i, -1.0, j, 1.0)
                + eval(&mut p, i, -1.0, j, -1.0))
                / (4.0 * h[i] * h[j]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Proposal covariance from the curvature at the mode: `(-H)^{-1}` with
/// eigenvalues floored, variances capped at `max_var`, scaled by `2.38²/d`.
fn curvature_covariance(h: &DMatrix<f64>, max_var: f64) -> DMatrix<f64> {
    let d = h.nrows();
    let neg = -(h + h.transpose()) * 0.5;
    let eig = neg.symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let floor = (top * 1e-8).max(1e-8);
    let inv = eig.eigenvalues.map(|v| 1.0 / v.max(floor));
    let mut cov = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
    for i in 0..d {
        let var = cov[(i, i)];
        if var > max_var {
            let r = (max_var / var).sqrt();
            cov.row_mut(i).scale_mut(r);
            cov.column_mut(i).scale_mut(r);
        }
    }
    cov * (2.38f64.powi(2) / d.max(1) as f64)
}

/// Orthogonal `Q` minimising `‖L Q − R‖_F`.
fn procrustes(l: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = (l.transpose() * r).svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    u * vt
}

/// Runs one chain and returns its retained draws.
pub fn run_chain(
    panel: &TimeSeriesPanel,
    design: &DeterministicDesign,
    proxies: &ProxySet,
    spec: &ModelSpec,
    cfg: &ChainConfig,
) -> Result<ChainOutput> {
    cfg.validate()?;
    let n = panel.nvars();
    spec.validate(n, proxies)?;
    if proxies.nproxies() > 0 && proxies.nobs() != panel.nobs() {
        return Err(Error::DimensionMismatch(format!(
            "{} proxy rows for {} observations",
            proxies.nobs(),
            panel.nobs()
        )));
    }
    let mut warnings = Vec::new();
    let (var_ols, u0) = fit_ols(panel, design, spec.var)?;
    let x = regressors(panel, design, spec.var)?;

    // Mode search and labeling of the starting point.
    let reference_in = match &spec.labeling {
        LabelingMode::Reference(r) => Some(r.clone()),
        _ => None,
    };
    let start = match (&reference_in, spec.variant.is_gaussian() && spec.zero_restrictions.is_empty()) {
        (Some(r), true) => {
            let l = first_step::cholesky_start(&u0, &[]);
            Some((&l * procrustes(&l, r), Vec::new()))
        }
        _ => None,
    };
    let mut fs = mode_search(&u0, &x, proxies, spec, start, &cfg.first_step)?;
    if fs.flat && !spec.variant.is_gaussian() {
        warnings.push("objective is nearly flat across rotations of B".to_string());
    }
    if !fs.converged {
        warnings.push(format!("mode search did not converge in {} iterations", fs.iterations));
    }
    let reference = match &spec.labeling {
        LabelingMode::Reference(r) => {
            let l = align_to_reference(&fs.b, r)?.ok_or_else(|| {
                Error::Initialization("no signed permutation of the mode satisfies the labeling rule".into())
            })?;
            fs.b = l.apply_columns(&fs.b);
            if !fs.shocks.is_empty() {
                let lambdas = l.apply_skewness(&fs.shocks.iter().map(|s| s.lambda()).collect::<Vec<_>>());
                let qs = l.apply_values(&fs.shocks);
                fs.shocks = lambdas
                    .iter()
                    .zip(&qs)
                    .map(|(&lam, s)| SkewTParams::new(lam, s.q()))
                    .collect::<Result<_>>()?;
            }
            fs.labeling = l;
            Some(r.clone())
        }
        LabelingMode::FirstStep => {
            fs = label_first_step(fs, &u0, proxies)?;
            Some(fs.b.clone())
        }
        LabelingMode::ProxyCorrelation => {
            fs = label_first_step(fs, &u0, proxies)?;
            None
        }
        LabelingMode::None => None,
    };
    let ref_inv = match &reference {
        Some(r) => Some(
            r.clone()
                .try_inverse()
                .ok_or(Error::SingularMatrix { det: r.determinant() })?,
        ),
        None => None,
    };

    let aug = if spec.variant == Variant::GaussianAugmented {
        Some(build_augmented(n, &x, proxies, spec.augmented)?)
    } else {
        None
    };
    let chain = Chain {
        spec,
        cfg,
        y: panel.values(),
        eval: Evaluator {
            variant: spec.variant,
            proxies: proxies.clone(),
            aug,
            t: panel.nobs(),
        },
        layout: FreeLayout::new(n, &spec.zero_restrictions),
        x,
        ref_inv,
        n,
        nterms: design.nterms(),
    };

    // Initial state.
    // Shapes restart from λ = 0, q = 10: the mode can sit on the q bound.
    let shocks = if chain.nongaussian() {
        vec![SkewTParams::new(0.0, 10.0)?; n]
    } else {
        Vec::new()
    };
    let (e0, logdet) = chain
        .eval
        .innovations(&u0, &fs.b)
        .ok_or_else(|| Error::Initialization("starting B is singular".into()))?;
    let mut mu = ExogeneityMeans::zeros(proxies, n);
    if spec.variant.estimates_exogeneity() {
        let m = chain.eval.moments(&e0);
        for (k, j) in proxies.non_target_pairs(n) {
            let v = m[(k, j)];
            mu.set(k, j, v, (v * v).max(0.01));
        }
    }
    let parts = chain
        .parts(e0, logdet, &shocks, &fs.block, &mu)
        .ok_or_else(|| Error::Initialization("log posterior is not finite at the starting point".into()))?;
    let mut state = State {
        pi: var_ols.to_stacked().as_slice().to_vec(),
        u: u0,
        binv_t: fs.b.clone().try_inverse().expect("checked invertible").transpose(),
        b: fs.b.clone(),
        logdet,
        shocks,
        block: fs.block.clone(),
        mu,
        parts,
    };
    if !chain.log_posterior(&state).is_finite() {
        return Err(Error::Initialization("log posterior is not finite at the starting point".into()));
    }
    if !chain.labeled(&state.b, &state.parts.e) {
        return Err(Error::Initialization("starting point violates the labeling rule".into()));
    }

    // Proposal blocks.
    let t = panel.nobs() as f64;
    let kx = chain.x.ncols();
    let sigma_u = state.u.transpose() * &state.u / t;
    let xtx_inv = if kx == 0 {
        DMatrix::zeros(0, 0)
    } else {
        (chain.x.transpose() * &chain.x)
            .try_inverse()
            .ok_or(Error::SingularDesign { rank: 0, cols: kx })?
    };
    let pi_cov = sigma_u.kronecker(&xtx_inv) * (cfg.pi_scale.powi(2) * 2.38f64.powi(2) / (kx * n).max(1) as f64);
    let mut pi_block = RandomWalkBlock::new("pi", &pi_cov);

    let sv = chain.structural_vec(&state.b, &state.block);
    let hess = numerical_hessian(|v| chain.structural_value(&state, v), &sv);
    let b_cov = curvature_covariance(&hess, 0.01) * cfg.b_scale.powi(2);
    let mut b_block = RandomWalkBlock::new("B", &b_cov);

    let shape_cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.05f64.powi(2), 0.3f64.powi(2)]))
        * cfg.shape_scale.powi(2);
    let mut shape_blocks: Vec<RandomWalkBlock> = (0..state.shocks.len())
        .map(|i| RandomWalkBlock::new(format!("shape{i}"), &shape_cov))
        .collect();
    debug_assert!(robust_cholesky(&shape_cov).iter().all(|v| v.is_finite()));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.stream);
    if cfg.burn_in == 0 {
        pi_block.freeze();
        b_block.freeze();
        shape_blocks.iter_mut().for_each(RandomWalkBlock::freeze);
    }
    let mut draws = Vec::with_capacity(cfg.retained());
    for it in 0..cfg.draws {
        if kx > 0 {
            chain.step_pi(&mut state, &mut pi_block, &mut rng);
        }
        chain.step_structural(&mut state, &mut b_block, &mut rng);
        for (i, blk) in shape_blocks.iter_mut().enumerate() {
            chain.step_shape(&mut state, i, blk, &mut rng);
        }
        if spec.variant.estimates_exogeneity() {
            chain.step_exogeneity(&mut state, &mut rng);
        }
        if it < cfg.burn_in {
            if kx > 0 {
                pi_block.observe(&state.pi);
            }
            b_block.observe(&chain.structural_vec(&state.b, &state.block));
            for (i, blk) in shape_blocks.iter_mut().enumerate() {
                blk.observe(&shape_coords(&state.shocks[i]));
            }
        }
        if (it + 1) % cfg.adapt_window == 0 {
            for blk in std::iter::once(&mut pi_block)
                .filter(|_| kx > 0)
                .chain(std::iter::once(&mut b_block))
                .chain(shape_blocks.iter_mut())
            {
                if blk.end_window(cfg.target_accept) == 0 {
                    return Err(Error::StuckChain {
                        block: blk.name().to_string(),
                        iteration: it + 1,
                    });
                }
            }
        }
        if it + 1 == cfg.burn_in {
            pi_block.freeze();
            b_block.freeze();
            shape_blocks.iter_mut().for_each(RandomWalkBlock::freeze);
        }
        if it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0 {
            draws.push(chain.snapshot(&state, it)?);
        }
    }

    let acceptance = std::iter::once(&pi_block)
        .filter(|_| kx > 0)
        .chain(std::iter::once(&b_block))
        .chain(shape_blocks.iter())
        .map(|b| (b.name().to_string(), b.acceptance_rate()))
        .collect();
    Ok(ChainOutput {
        draws,
        acceptance,
        first_step: fs,
        reference,
        warnings,
    })
}
