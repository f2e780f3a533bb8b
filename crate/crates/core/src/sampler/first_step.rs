//! Mode search for the structural parameters with the reduced form fixed at
//! least squares, used as the labeled first-step estimator and as the chain's
//! starting point.

use std::cell::RefCell;
use std::rc::Rc;

use argmin::core::{CostFunction, Executor, Gradient, State, TerminationReason, TerminationStatus};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::BFGS;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::likelihood::{ExogeneityMeans, ProxySet};
use crate::proxy::{build_augmented, ProxyBlock};
use crate::shocks::{SkewTParams, LAMBDA_BOUNDS, Q_BOUNDS};
use crate::var::{fit_ols, regressors, DeterministicDesign, TimeSeriesPanel};

use super::labeling::{proxy_label_shocks, ShockLabeling};
use super::model::{Evaluator, FreeLayout};
use super::{ModelSpec, Variant};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstStepOptions {
    pub max_iters: u64,
    /// Haar rotations used by the flatness diagnostic.
    pub flatness_rotations: usize,
    /// Relative objective range below which the surface is reported flat.
    pub flatness_tol: f64,
    pub seed: u64,
}

impl Default for FirstStepOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            flatness_rotations: 100,
            flatness_tol: 0.01,
            seed: 0,
        }
    }
}

/// Result of the mode search.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstStep {
    pub b: DMatrix<f64>,
    pub shocks: Vec<SkewTParams>,
    pub block: ProxyBlock,
    pub objective: f64,
    pub iterations: u64,
    pub converged: bool,
    /// Objective nearly constant across random rotations of B.
    pub flat: bool,
    /// Relabeling applied after optimization (identity if none).
    pub labeling: ShockLabeling,
}

const LAMBDA_SPAN: f64 = LAMBDA_BOUNDS.1;
const Q_SPAN: f64 = Q_BOUNDS.1 - Q_BOUNDS.0;

fn decode_lambda(a: f64) -> f64 {
    LAMBDA_SPAN * a.tanh()
}

fn encode_lambda(l: f64) -> f64 {
    (l / LAMBDA_SPAN).clamp(-0.999_999, 0.999_999).atanh()
}

fn decode_q(b: f64) -> f64 {
    Q_BOUNDS.0 + Q_SPAN / (1.0 + (-b).exp())
}

fn encode_q(q: f64) -> f64 {
    let p = ((q - Q_BOUNDS.0) / Q_SPAN).clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

/// Parameter vector: free B entries, then `(atanh-λ, logit-q)` per shock for
/// skewed-t variants, then proxy loadings and log noise scales for the
/// augmented variant.
#[derive(Debug, Clone)]
pub(crate) struct ModeObjective {
    pub eval: Evaluator,
    pub layout: FreeLayout,
    pub u: DMatrix<f64>,
    pub mu0: ExogeneityMeans,
    pub n: usize,
}

impl ModeObjective {
    fn nongaussian(&self) -> bool {
        !self.eval.variant.is_gaussian()
    }

    fn nproxy_params(&self) -> usize {
        if self.eval.variant == Variant::GaussianAugmented {
            2 * self.eval.proxies.nproxies()
        } else {
            0
        }
    }

    pub fn encode(&self, b: &DMatrix<f64>, shocks: &[SkewTParams], block: &ProxyBlock) -> Vec<f64> {
        let mut v = self.layout.to_vec(b);
        if self.nongaussian() {
            for s in shocks {
                v.push(encode_lambda(s.lambda()));
                v.push(encode_q(s.q()));
            }
        }
        if self.nproxy_params() > 0 {
            v.extend(&block.loadings);
            v.extend(&block.log_noise_scale);
        }
        v
    }

    pub fn decode(&self, v: &[f64]) -> (DMatrix<f64>, Vec<SkewTParams>, ProxyBlock) {
        let nb = self.layout.len();
        let b = self.layout.to_matrix(&v[..nb]);
        let mut pos = nb;
        let shocks = if self.nongaussian() {
            let s = (0..self.n)
                .map(|i| {
                    SkewTParams::new(decode_lambda(v[nb + 2 * i]), decode_q(v[nb + 2 * i + 1]))
                        .expect("transformed parameters stay in bounds")
                })
                .collect();
            pos += 2 * self.n;
            s
        } else {
            Vec::new()
        };
        let k = self.eval.proxies.nproxies();
        let block = if self.nproxy_params() > 0 {
            ProxyBlock {
                loadings: v[pos..pos + k].to_vec(),
                log_noise_scale: v[pos + k..pos + 2 * k].to_vec(),
            }
        } else {
            ProxyBlock::new(k)
        };
        (b, shocks, block)
    }

    /// Log posterior kernel at the decoded point (−∞ when B is singular).
    pub fn value(&self, v: &[f64]) -> f64 {
        let (b, shocks, block) = self.decode(v);
        self.value_at(&b, &shocks, &block)
    }

    pub fn value_at(&self, b: &DMatrix<f64>, shocks: &[SkewTParams], block: &ProxyBlock) -> f64 {
        let Some((e, logdet)) = self.eval.innovations(&self.u, b) else {
            return f64::NEG_INFINITY;
        };
        let col = if self.nongaussian() {
            Evaluator::column_ll(&e, shocks)
        } else {
            Vec::new()
        };
        let lik = self.eval.likelihood(&e, logdet, &col, block);
        // Skewed-t variants profile μ out, which leaves the unweighted likelihood.
        let rw = if self.eval.variant == Variant::GaussianWeighting {
            self.eval.reweight(&self.eval.moments(&e), &self.mu0)
        } else {
            0.0
        };
        let v = lik + rw;
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    }
}

const PENALTY: f64 = 1e100;

struct Problem {
    obj: Rc<ModeObjective>,
    best: Rc<RefCell<(f64, Vec<f64>)>>,
}

impl Problem {
    fn cost_of(&self, p: &[f64]) -> f64 {
        let v = self.obj.value(p);
        let c = if v.is_finite() { -v } else { PENALTY };
        let mut best = self.best.borrow_mut();
        if c < best.0 {
            *best = (c, p.to_vec());
        }
        c
    }
}

impl CostFunction for Problem {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.cost_of(p))
    }
}

impl Gradient for Problem {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, p: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        Ok(central_gradient(|x| self.cost_of(x), p))
    }
}

fn central_gradient(f: impl Fn(&[f64]) -> f64, p: &[f64]) -> Vec<f64> {
    let mut x = p.to_vec();
    (0..p.len())
        .map(|i| {
            let h = 1e-5 * p[i].abs().max(1.0);
            x[i] = p[i] + h;
            let up = f(&x);
            x[i] = p[i] - h;
            let down = f(&x);
            x[i] = p[i];
            if up >= PENALTY || down >= PENALTY {
                0.0
            } else {
                (up - down) / (2.0 * h)
            }
        })
        .collect()
}

/// Maximizes the objective from `start`. Never fails on non-convergence;
/// the returned point is the best one evaluated.
pub(crate) fn optimize(obj: ModeObjective, start: Vec<f64>, opts: &FirstStepOptions) -> (Vec<f64>, f64, u64, bool, Rc<ModeObjective>) {
    let obj = Rc::new(obj);
    let best = Rc::new(RefCell::new((f64::INFINITY, start.clone())));
    let problem = Problem {
        obj: Rc::clone(&obj),
        best: Rc::clone(&best),
    };
    let t = obj.eval.t.max(1) as f64;
    let d = start.len();
    let inv_h: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 / t } else { 0.0 }).collect())
        .collect();
    let solver = BFGS::new(MoreThuenteLineSearch::new())
        .with_tolerance_grad(1e-6 * t)
        .and_then(|s| s.with_tolerance_cost(1e-12))
        .expect("valid tolerances");
    let run = Executor::new(problem, solver)
        .configure(|s| s.param(start).inv_hessian(inv_h).max_iters(opts.max_iters))
        .timer(false)
        .run();
    let (mut iterations, mut converged) = (0, false);
    if let Ok(res) = &run {
        iterations = res.state().get_iter();
        converged = matches!(
            res.state().get_termination_status(),
            TerminationStatus::Terminated(TerminationReason::SolverConverged)
        );
    }
    let (cost, point) = best.borrow().clone();
    if !converged {
        let g = central_gradient(|x| {
            let v = obj.value(x);
            if v.is_finite() {
                -v
            } else {
                PENALTY
            }
        }, &point);
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        converged = gmax <= 1e-4 * t;
    }
    (point, -cost, iterations, converged, obj)
}

/// Haar-distributed orthogonal matrix.
pub fn haar_orthogonal<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Relative range of the objective across random rotations `B Q`.
pub(crate) fn rotation_range(obj: &ModeObjective, b: &DMatrix<f64>, shocks: &[SkewTParams], block: &ProxyBlock, opts: &FirstStepOptions) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_f1a7);
    let base = obj.value_at(b, shocks, block);
    let (mut lo, mut hi) = (base, base);
    for _ in 0..opts.flatness_rotations {
        let q = haar_orthogonal(b.ncols(), &mut rng);
        let v = obj.value_at(&(b * q), shocks, block);
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (hi - lo) / base.abs().max(f64::MIN_POSITIVE)
}

/// Starting B: lower Cholesky factor of the residual covariance with any
/// restricted entries set to zero.
pub(crate) fn cholesky_start(u: &DMatrix<f64>, zeros: &[(usize, usize)]) -> DMatrix<f64> {
    let t = u.nrows().max(1) as f64;
    let n = u.ncols();
    let cov = u.transpose() * u / t;
    let mut l = cov
        .clone()
        .cholesky()
        .map(|c| c.l())
        .unwrap_or_else(|| DMatrix::from_diagonal(&cov.diagonal().map(|v| v.max(1e-8).sqrt())));
    for &(r, c) in zeros {
        l[(r, c)] = 0.0;
    }
    if l.determinant().abs() <= crate::var::SINGULAR_DET_TOL {
        l = DMatrix::from_diagonal(&cov.diagonal().map(|v| v.max(1e-8).sqrt()));
    }
    debug_assert_eq!(l.nrows(), n);
    l
}

/// Labeled first-step estimate of B for the skewed-t variants.
///
/// Least-squares reduced form, Cholesky start, maximization of the skewed-t
/// likelihood over B and the shock shapes, then relabeling by proxy
/// correlation when proxies are present (otherwise columns are only signed so
/// the diagonal is positive). Returns a non-convergence error carrying the
/// best point when the optimizer stalls.
pub fn first_step_estimate(
    panel: &TimeSeriesPanel,
    design: &DeterministicDesign,
    proxies: &ProxySet,
    spec: &ModelSpec,
    opts: &FirstStepOptions,
) -> Result<FirstStep> {
    first_step_estimate_from(panel, design, proxies, spec, None, opts)
}

/// As [`first_step_estimate`] but starting the optimizer at a given `B` and
/// shock shapes instead of the Cholesky factor with `λ = 0, q = 10`.
pub fn first_step_estimate_from(
    panel: &TimeSeriesPanel,
    design: &DeterministicDesign,
    proxies: &ProxySet,
    spec: &ModelSpec,
    start: Option<(DMatrix<f64>, Vec<SkewTParams>)>,
    opts: &FirstStepOptions,
) -> Result<FirstStep> {
    if spec.variant.is_gaussian() {
        return Err(Error::InvalidInput("first-step estimation needs a skewed-t variant".into()));
    }
    spec.validate(panel.nvars(), proxies)?;
    let (_, u) = fit_ols(panel, design, spec.var)?;
    let x = regressors(panel, design, spec.var)?;
    let fs = mode_search(&u, &x, proxies, spec, start, opts)?;
    let fs = label_first_step(fs, &u, proxies)?;
    if !fs.converged {
        return Err(Error::NonConvergence {
            iterations: fs.iterations,
            objective: fs.objective,
            best: fs.b,
        });
    }
    Ok(fs)
}

/// Runs the optimizer for any variant from an optional starting B.
pub(crate) fn mode_search(
    u: &DMatrix<f64>,
    x: &DMatrix<f64>,
    proxies: &ProxySet,
    spec: &ModelSpec,
    start: Option<(DMatrix<f64>, Vec<SkewTParams>)>,
    opts: &FirstStepOptions,
) -> Result<FirstStep> {
    let n = u.ncols();
    let aug = if spec.variant == Variant::GaussianAugmented {
        Some(build_augmented(n, x, proxies, spec.augmented)?)
    } else {
        None
    };
    let eval = Evaluator {
        variant: spec.variant,
        proxies: proxies.clone(),
        aug,
        t: u.nrows(),
    };
    let obj = ModeObjective {
        eval,
        layout: FreeLayout::new(n, &spec.zero_restrictions),
        u: u.clone(),
        mu0: ExogeneityMeans::zeros(proxies, n),
        n,
    };
    let (b0, shocks0) = match start {
        Some((b, s)) if s.len() == n => (b, s),
        Some((b, _)) => (b, vec![SkewTParams::new(0.0, 10.0).expect("valid"); n]),
        None => (
            cholesky_start(u, &spec.zero_restrictions),
            vec![SkewTParams::new(0.0, 10.0).expect("valid"); n],
        ),
    };
    if b0.shape() != (n, n) {
        return Err(Error::DimensionMismatch("starting B has the wrong shape".into()));
    }
    let block0 = initial_block(&obj, &b0);
    let start = obj.encode(&b0, &shocks0, &block0);
    if !obj.value(&start).is_finite() {
        return Err(Error::Initialization("objective is not finite at the starting point".into()));
    }
    let (point, objective, iterations, converged, obj) = optimize(obj, start, opts);
    let (b, shocks, block) = obj.decode(&point);
    let range = if obj.nongaussian() {
        rotation_range(&obj, &b, &shocks, &block, opts)
    } else {
        f64::INFINITY
    };
    let flat = range < opts.flatness_tol;
    if flat {
        log::warn!("objective varies by only {:.3}% across random rotations of B; identification is weak", 100.0 * range);
    }
    if !converged {
        log::warn!("mode search stopped after {iterations} iterations without converging");
    }
    Ok(FirstStep {
        b,
        shocks,
        block,
        objective,
        iterations,
        converged,
        flat,
        labeling: ShockLabeling::identity(n),
    })
}

fn initial_block(obj: &ModeObjective, b: &DMatrix<f64>) -> ProxyBlock {
    let k = obj.eval.proxies.nproxies();
    let mut block = ProxyBlock::new(k);
    if obj.eval.variant != Variant::GaussianAugmented {
        return block;
    }
    // Loadings from regressing each proxy on its target innovation.
    if let Some((e, _)) = obj.eval.innovations(&obj.u, b) {
        let aug = obj.eval.aug.as_ref().expect("augmented");
        for (p, &target) in aug.targets().iter().enumerate() {
            let et = e.column(target);
            let z = aug.proxy_residuals().column(p);
            let phi = z.dot(&et) / et.dot(&et).max(1e-12);
            let resid = z - et * phi;
            block.loadings[p] = phi;
            let var = resid.norm_squared() / z.len().max(1) as f64;
            if aug.config().estimate_noise_scale {
                block.log_noise_scale[p] = 0.5 * var.max(1e-8).ln();
            }
        }
    }
    block
}

/// Applies proxy-correlation labeling (or positive-diagonal signing) to a mode.
pub(crate) fn label_first_step(mut fs: FirstStep, u: &DMatrix<f64>, proxies: &ProxySet) -> Result<FirstStep> {
    let n = fs.b.ncols();
    let labeling = if proxies.nproxies() > 0 {
        let e = u * fs
            .b
            .clone()
            .try_inverse()
            .ok_or(Error::SingularMatrix { det: fs.b.determinant() })?
            .transpose();
        let mut l = proxy_label_shocks(&e, proxies)?;
        let targets = proxies.targets();
        for j in 0..n {
            if !targets.contains(&j) && fs.b[(j, l.perm[j])] < 0.0 {
                l.signs[j] = -1.0;
            }
        }
        l
    } else {
        let mut l = ShockLabeling::identity(n);
        for j in 0..n {
            if fs.b[(j, j)] < 0.0 {
                l.signs[j] = -1.0;
            }
        }
        l
    };
    fs.b = labeling.apply_columns(&fs.b);
    if !fs.shocks.is_empty() {
        let lambdas = labeling.apply_skewness(&fs.shocks.iter().map(|s| s.lambda()).collect::<Vec<_>>());
        let qs = labeling.apply_values(&fs.shocks.iter().map(|s| s.q()).collect::<Vec<_>>());
        fs.shocks = lambdas
            .iter()
            .zip(&qs)
            .map(|(&l, &q)| SkewTParams::new(l, q))
            .collect::<Result<_>>()?;
    }
    fs.labeling = labeling;
    Ok(fs)
}
