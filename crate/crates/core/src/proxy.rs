//! Frequentist proxy estimator and the proxy-augmented SVAR used as baselines.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::likelihood::{gaussian_log_likelihood_innov, ProxySet, LN_SQRT_2PI};
use crate::var::{least_squares, StructuralMatrix};

/// Default weak-instrument guard: `|Σ z_t u_it| > 1e-8 · T`.
pub const DEFAULT_WEAK_GUARD: f64 = 1e-8;

/// Relative impacts `b_j / b_i = Σ z u_j / Σ z u_i` of the shock instrumented by
/// `z`, normalized on residual column `target`.
pub fn iv_impact_ratio(z: &[f64], u: &DMatrix<f64>, target: usize, guard: f64) -> Result<DVector<f64>> {
    let (t, n) = u.shape();
    if z.len() != t {
        return Err(Error::DimensionMismatch(format!("proxy has {} rows, residuals {t}", z.len())));
    }
    if target >= n {
        return Err(Error::InvalidInput(format!("target column {target} out of {n}")));
    }
    let zv = DVector::from_column_slice(z);
    let cov = u.transpose() * &zv;
    let den = cov[target];
    let threshold = guard * t as f64;
    if !(den.abs() > threshold) {
        return Err(Error::WeakProxy {
            covariance: den / t as f64,
            threshold: guard,
        });
    }
    let mut out = cov / den;
    out[target] = 1.0;
    Ok(out)
}

/// Switches for the proxy equation of the augmented system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentedConfig {
    /// Estimate the measurement-noise scale σ_η instead of fixing it at 1.
    pub estimate_noise_scale: bool,
    /// Let the proxy equation carry its own intercept and lag loadings
    /// (fitted by least squares); otherwise both are zero.
    pub proxy_dynamics: bool,
}

impl AugmentedConfig {
    pub fn simplified() -> Self {
        Self {
            estimate_noise_scale: false,
            proxy_dynamics: false,
        }
    }

    pub fn general() -> Self {
        Self {
            estimate_noise_scale: true,
            proxy_dynamics: true,
        }
    }
}

impl Default for AugmentedConfig {
    fn default() -> Self {
        Self::simplified()
    }
}

/// Stacked `(y, z)` system with impact matrix `[[B, 0], [Φ, Σ_η]]`.
///
/// `Φ` has one free loading per proxy (on its target shock); every other
/// entry is an exogeneity zero. `Σ_η` is diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    proxy_resid: DMatrix<f64>,
    targets: Vec<usize>,
    nvars: usize,
    config: AugmentedConfig,
}

/// Free parameters of the proxy block.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyBlock {
    pub loadings: Vec<f64>,
    pub log_noise_scale: Vec<f64>,
}

impl ProxyBlock {
    pub fn new(nproxies: usize) -> Self {
        Self {
            loadings: vec![0.0; nproxies],
            log_noise_scale: vec![0.0; nproxies],
        }
    }
}

/// Builds the augmented system. `lagged_regressors` (T×k, possibly zero
/// columns) are the VAR regressors; they enter the proxy equation only when
/// `proxy_dynamics` is set.
pub fn build_augmented(
    nvars: usize,
    lagged_regressors: &DMatrix<f64>,
    proxies: &ProxySet,
    config: AugmentedConfig,
) -> Result<AugmentedSystem> {
    let t = proxies.nobs();
    if lagged_regressors.nrows() != t {
        return Err(Error::DimensionMismatch(format!(
            "proxies have {t} rows, regressors {}",
            lagged_regressors.nrows()
        )));
    }
    let z = proxies.z();
    let proxy_resid = if config.proxy_dynamics {
        let mut x = DMatrix::from_element(t, 1 + lagged_regressors.ncols(), 1.0);
        x.columns_mut(1, lagged_regressors.ncols()).copy_from(lagged_regressors);
        let coef = least_squares(&x, z)?;
        z - x * coef
    } else {
        z.clone()
    };
    Ok(AugmentedSystem {
        proxy_resid,
        targets: proxies.targets().to_vec(),
        nvars,
        config,
    })
}

impl AugmentedSystem {
    pub fn nproxies(&self) -> usize {
        self.targets.len()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn config(&self) -> AugmentedConfig {
        self.config
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn proxy_residuals(&self) -> &DMatrix<f64> {
        &self.proxy_resid
    }

    /// `(n+K)×(n+K)` stacked impact matrix.
    pub fn stacked_impact(&self, b: &DMatrix<f64>, block: &ProxyBlock) -> DMatrix<f64> {
        let n = self.nvars;
        let k = self.nproxies();
        let mut out = DMatrix::zeros(n + k, n + k);
        out.view_mut((0, 0), (n, n)).copy_from(b);
        for (p, &target) in self.targets.iter().enumerate() {
            out[(n + p, target)] = block.loadings[p];
            out[(n + p, n + p)] = self.noise_scale(block, p);
        }
        out
    }

    /// Stacked residuals `[U, Z̃]`.
    pub fn stacked_residuals(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let (t, n) = u.shape();
        let mut out = DMatrix::zeros(t, n + self.nproxies());
        out.columns_mut(0, n).copy_from(u);
        out.columns_mut(n, self.nproxies()).copy_from(&self.proxy_resid);
        out
    }

    fn noise_scale(&self, block: &ProxyBlock, p: usize) -> f64 {
        if self.config.estimate_noise_scale {
            block.log_noise_scale[p].exp()
        } else {
            1.0
        }
    }

    /// Gaussian log likelihood of the stacked system, using the block
    /// triangular structure: `e = B^{-1} u` and `η_k = (z̃_k - Φ_k e_target)/σ_k`.
    pub fn log_likelihood(&self, u: &DMatrix<f64>, b: &StructuralMatrix, block: &ProxyBlock) -> Result<f64> {
        let e = u * b.inverse().transpose();
        self.log_likelihood_innov(&e, b.log_abs_det(), block)
    }

    pub fn log_likelihood_innov(&self, e: &DMatrix<f64>, log_abs_det: f64, block: &ProxyBlock) -> Result<f64> {
        let t = e.nrows();
        if t != self.proxy_resid.nrows() || e.ncols() != self.nvars {
            return Err(Error::DimensionMismatch("innovations not aligned with the augmented system".into()));
        }
        if block.loadings.len() != self.nproxies() || block.log_noise_scale.len() != self.nproxies() {
            return Err(Error::DimensionMismatch("proxy block has the wrong length".into()));
        }
        let mut total = gaussian_log_likelihood_innov(e, log_abs_det);
        for (p, &target) in self.targets.iter().enumerate() {
            let sigma = self.noise_scale(block, p);
            let phi = block.loadings[p];
            let mut ss = 0.0;
            for r in 0..t {
                let eta = (self.proxy_resid[(r, p)] - phi * e[(r, target)]) / sigma;
                ss += eta * eta;
            }
            total += -(t as f64) * (sigma.ln() + LN_SQRT_2PI) - 0.5 * ss;
        }
        Ok(total)
    }
}
