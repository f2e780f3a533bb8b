//! Gaussian and skewed-t SVAR likelihoods and the proxy re-weighting term.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::shocks::SkewTParams;
use crate::var::{innovations_from_residuals, residuals, DeterministicDesign, ReducedFormVar, StructuralMatrix, TimeSeriesPanel};

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Proxy observations `z` (T×K), the structural shock each proxy targets
/// (0-based) and the fixed proxy variances used in the re-weighting.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxySet {
    z: DMatrix<f64>,
    targets: Vec<usize>,
    variance: Vec<f64>,
}

impl ProxySet {
    /// Proxies with variances taken as the sample variance of each column.
    pub fn new(z: DMatrix<f64>, targets: Vec<usize>, nvars: usize) -> Result<Self> {
        let variance = (0..z.ncols()).map(|k| column_moments(&z, k).1).collect();
        Self::with_variance(z, targets, variance, nvars)
    }

    /// Proxies demeaned and scaled to unit variance, column by column.
    pub fn standardized(mut z: DMatrix<f64>, targets: Vec<usize>, nvars: usize) -> Result<Self> {
        for k in 0..z.ncols() {
            let (mean, var) = column_moments(&z, k);
            if !(var > 0.0) {
                return Err(Error::Degenerate(format!("proxy column {k} has zero variance")));
            }
            let sd = var.sqrt();
            z.column_mut(k).apply(|v| *v = (*v - mean) / sd);
        }
        let ones = vec![1.0; targets.len()];
        Self::with_variance(z, targets, ones, nvars)
    }

    pub fn with_variance(z: DMatrix<f64>, targets: Vec<usize>, variance: Vec<f64>, nvars: usize) -> Result<Self> {
        if targets.len() != z.ncols() || variance.len() != z.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} proxy columns, {} targets, {} variances",
                z.ncols(),
                targets.len(),
                variance.len()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("proxy observations must be finite".into()));
        }
        for (k, &t) in targets.iter().enumerate() {
            if t >= nvars {
                return Err(Error::InvalidInput(format!("proxy {k} targets shock {t} of {nvars}")));
            }
            if targets[..k].contains(&t) {
                return Err(Error::InvalidInput(format!("two proxies target shock {t}")));
            }
        }
        if variance.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain("proxy variances must be positive".into()));
        }
        Ok(Self { z, targets, variance })
    }

    /// Empty set for models without proxies.
    pub fn none(nobs: usize) -> Self {
        Self {
            z: DMatrix::zeros(nobs, 0),
            targets: Vec::new(),
            variance: Vec::new(),
        }
    }

    pub fn nproxies(&self) -> usize {
        self.z.ncols()
    }

    pub fn nobs(&self) -> usize {
        self.z.nrows()
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    /// `(proxy, shock)` pairs entering the re-weighting: every shock except the target.
    pub fn non_target_pairs(&self, nvars: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, &t) in self.targets.iter().enumerate() {
            out.extend((0..nvars).filter(|&j| j != t).map(|j| (k, j)));
        }
        out
    }

    /// Rows `start..start + len`.
    pub fn rows(&self, start: usize, len: usize) -> Self {
        Self {
            z: self.z.rows(start, len).into_owned(),
            targets: self.targets.clone(),
            variance: self.variance.clone(),
        }
    }
}

fn column_moments(z: &DMatrix<f64>, k: usize) -> (f64, f64) {
    let col = z.column(k);
    let n = col.len().max(1) as f64;
    let mean = col.sum() / n;
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Means `μ_{k,j}` and hyper-variances `σ²_{k,j}` of the proxy moments for
/// non-target shocks. Stored as K×n matrices; target entries are unused and
/// held at zero (μ) and one (σ²).
#[derive(Debug, Clone, PartialEq)]
pub struct ExogeneityMeans {
    mu: DMatrix<f64>,
    sigma2: DMatrix<f64>,
    targets: Vec<usize>,
}

impl ExogeneityMeans {
    /// All means zero: the exogenous weighting.
    pub fn zeros(proxies: &ProxySet, nvars: usize) -> Self {
        let k = proxies.nproxies();
        Self {
            mu: DMatrix::zeros(k, nvars),
            sigma2: DMatrix::from_element(k, nvars, 1.0),
            targets: proxies.targets().to_vec(),
        }
    }

    pub fn new(mu: DMatrix<f64>, sigma2: DMatrix<f64>, proxies: &ProxySet) -> Result<Self> {
        if mu.shape() != sigma2.shape() || mu.nrows() != proxies.nproxies() {
            return Err(Error::DimensionMismatch("μ and σ² must both be K×n".into()));
        }
        let mut out = Self {
            mu,
            sigma2,
            targets: proxies.targets().to_vec(),
        };
        for (k, &t) in out.targets.iter().enumerate() {
            if t < out.mu.ncols() {
                out.mu[(k, t)] = 0.0;
                out.sigma2[(k, t)] = 1.0;
            }
        }
        if out.sigma2.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Domain("hyper-variances σ²_μ must be positive".into()));
        }
        Ok(out)
    }

    pub fn mu(&self) -> &DMatrix<f64> {
        &self.mu
    }

    pub fn sigma2(&self) -> &DMatrix<f64> {
        &self.sigma2
    }

    pub fn set(&mut self, k: usize, j: usize, mu: f64, sigma2: f64) {
        debug_assert_ne!(self.targets[k], j, "target entries carry no mean");
        self.mu[(k, j)] = mu;
        self.sigma2[(k, j)] = sigma2;
    }
}

/// Sample moments `m_{k,j} = (1/T) Σ_t z_{k,t} e_{j,t}` (K×n), not centred.
pub fn proxy_moment_stats(proxies: &ProxySet, innovations: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if proxies.nobs() != innovations.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} proxy rows vs {} innovation rows",
            proxies.nobs(),
            innovations.nrows()
        )));
    }
    let t = innovations.nrows().max(1) as f64;
    Ok(proxies.z().transpose() * innovations / t)
}

/// `Σ_k Σ_{j ≠ target(k)} log N(m_{k,j}; μ_{k,j}, Var(z_k)/T)` from precomputed moments.
pub fn reweight_log_from_moments(moments: &DMatrix<f64>, proxies: &ProxySet, nobs: usize, mu: &ExogeneityMeans) -> f64 {
    let t = nobs as f64;
    let mut total = 0.0;
    for (k, &target) in proxies.targets().iter().enumerate() {
        let var = proxies.variance()[k] / t;
        let norm = -LN_SQRT_2PI - 0.5 * var.ln();
        for j in 0..moments.ncols() {
            if j == target {
                continue;
            }
            let d = moments[(k, j)] - mu.mu()[(k, j)];
            total += norm - 0.5 * d * d / var;
        }
    }
    total
}

/// Proxy re-weighting term. With all μ = 0 this is the exogenous weighting.
pub fn reweight_log(proxies: &ProxySet, innovations: &DMatrix<f64>, mu: &ExogeneityMeans) -> Result<f64> {
    if mu.mu().nrows() != proxies.nproxies() || mu.mu().ncols() != innovations.ncols() {
        return Err(Error::DimensionMismatch("exogeneity means not aligned with proxies/shocks".into()));
    }
    let m = proxy_moment_stats(proxies, innovations)?;
    Ok(reweight_log_from_moments(&m, proxies, innovations.nrows(), mu))
}

/// Gaussian log likelihood from reduced-form residuals.
pub fn gaussian_log_likelihood_resid(u: &DMatrix<f64>, b: &StructuralMatrix) -> Result<f64> {
    let e = innovations_from_residuals(u, b)?;
    Ok(gaussian_log_likelihood_innov(&e, b.log_abs_det()))
}

/// Gaussian log likelihood given innovations and `log|det B|`.
pub fn gaussian_log_likelihood_innov(e: &DMatrix<f64>, log_abs_det: f64) -> f64 {
    let t = e.nrows() as f64;
    let n = e.ncols() as f64;
    -t * log_abs_det - t * n * LN_SQRT_2PI - 0.5 * e.norm_squared()
}

/// Skewed-t log likelihood from reduced-form residuals.
pub fn nongaussian_log_likelihood_resid(u: &DMatrix<f64>, b: &StructuralMatrix, shocks: &[SkewTParams]) -> Result<f64> {
    let e = innovations_from_residuals(u, b)?;
    nongaussian_log_likelihood_innov(&e, b.log_abs_det(), shocks)
}

/// Skewed-t log likelihood given innovations and `log|det B|`.
pub fn nongaussian_log_likelihood_innov(e: &DMatrix<f64>, log_abs_det: f64, shocks: &[SkewTParams]) -> Result<f64> {
    if shocks.len() != e.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} shock distributions for {} shocks",
            shocks.len(),
            e.ncols()
        )));
    }
    let t = e.nrows() as f64;
    let mut total = -t * log_abs_det;
    for (i, p) in shocks.iter().enumerate() {
        total += e.column(i).iter().map(|&x| p.ln_pdf(x)).sum::<f64>();
    }
    Ok(total)
}

/// Gaussian SVAR log likelihood `-T log|det B| + Σ log φ(e_it)`.
pub fn gaussian_log_likelihood(
    panel: &TimeSeriesPanel,
    design: &DeterministicDesign,
    var: &ReducedFormVar,
    b: &StructuralMatrix,
) -> Result<f64> {
    let u = residuals(panel, design, var)?;
    gaussian_log_likelihood_resid(&u, b)
}

/// Skewed-t SVAR log likelihood `-T log|det B| + Σ log f_i(e_it; λ_i, q_i)`.
pub fn nongaussian_log_likelihood(
    panel: &TimeSeriesPanel,
    design: &DeterministicDesign,
    var: &ReducedFormVar,
    b: &StructuralMatrix,
    shocks: &[SkewTParams],
) -> Result<f64> {
    let u = residuals(panel, design, var)?;
    nongaussian_log_likelihood_resid(&u, b, shocks)
}
