//! Per-draw post-processing: impulse responses, multipliers, proxy
//! correlations, shock moments and residualized proxies.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::likelihood::ProxySet;
use crate::sampler::labeling::correlation;
use crate::sampler::PosteriorDraw;
use crate::shocks::sample_skewness_kurtosis;
use crate::stats::quantile;
use crate::var::{impulse_responses, least_squares, structural_innovations, DeterministicDesign, StructuralMatrix, TimeSeriesPanel};

use super::data::{OUTPUT, SPEND, TAX};

/// Lower, middle and upper posterior percentiles.
pub const BANDS: [f64; 3] = [0.16, 0.5, 0.84];

/// Average shares of tax revenue and spending in GDP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdpShares {
    pub tax: f64,
    pub spend: f64,
}

impl Default for GdpShares {
    fn default() -> Self {
        Self { tax: 0.175, spend: 0.091 }
    }
}

/// Pointwise 16/50/84 percentiles of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBands {
    pub lower: Vec<f64>,
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PathBands {
    pub fn from_paths(paths: &[Vec<f64>], len: usize) -> Self {
        let at = |tau: f64| -> Vec<f64> {
            (0..len)
                .map(|h| quantile(&paths.iter().map(|p| p[h]).collect::<Vec<_>>(), tau))
                .collect()
        };
        Self {
            lower: at(BANDS[0]),
            median: at(BANDS[1]),
            upper: at(BANDS[2]),
        }
    }

    /// Horizon and value of the largest median entry.
    pub fn peak(&self) -> (usize, f64) {
        self.median
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (h, v)| if v > acc.1 { (h, v) } else { acc })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierResult {
    pub horizons: Vec<usize>,
    pub tax: PathBands,
    pub spend: PathBands,
    /// Spending minus tax multiplier.
    pub difference: PathBands,
    /// Share of draws with a larger spending than tax multiplier at impact.
    pub prob_spend_above_tax_at_impact: f64,
    pub used: usize,
    pub excluded: usize,
    /// More than 1% of the draws were excluded.
    pub flagged: bool,
}

/// Impact responses whose magnitude falls below this are treated as zero.
pub const IMPACT_TOL: f64 = 1e-10;

/// Tax and spending multiplier paths of one draw from its impulse responses
/// (variables and shocks ordered τ, g, y). The tax shock is scaled to move
/// τ by −1 on impact, the spending shock to move g by +1. `None` if either
/// impact is numerically zero.
pub fn draw_multipliers(irf: &[DMatrix<f64>], shares: GdpShares) -> Option<(Vec<f64>, Vec<f64>)> {
    let tax_impact = irf.first()?[(TAX, TAX)];
    let spend_impact = irf[0][(SPEND, SPEND)];
    if tax_impact.abs() < IMPACT_TOL || spend_impact.abs() < IMPACT_TOL {
        return None;
    }
    let tax = irf.iter().map(|r| -r[(OUTPUT, TAX)] / tax_impact / shares.tax).collect();
    let spend = irf.iter().map(|r| r[(OUTPUT, SPEND)] / spend_impact / shares.spend).collect();
    Some((tax, spend))
}

pub fn draw_irf(draw: &PosteriorDraw, horizon: usize) -> Result<Vec<DMatrix<f64>>> {
    Ok(impulse_responses(&draw.var, &StructuralMatrix::new(draw.b.clone())?, horizon))
}

pub fn compute_multipliers(draws: &[PosteriorDraw], horizon: usize, shares: GdpShares) -> Result<MultiplierResult> {
    if draws.is_empty() {
        return Err(Error::InvalidInput("no draws".into()));
    }
    if draws[0].b.shape() != (3, 3) {
        return Err(Error::DimensionMismatch("multipliers need the three-variable (τ, g, y) system".into()));
    }
    let per_draw: Vec<Option<(Vec<f64>, Vec<f64>)>> = draws
        .par_iter()
        .map(|d| Ok(draw_multipliers(&draw_irf(d, horizon)?, shares)))
        .collect::<Result<_>>()?;
    let kept: Vec<(Vec<f64>, Vec<f64>)> = per_draw.into_iter().flatten().collect();
    let excluded = draws.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::Degenerate("every draw has a zero fiscal impact response".into()));
    }
    let len = horizon + 1;
    let tax: Vec<Vec<f64>> = kept.iter().map(|k| k.0.clone()).collect();
    let spend: Vec<Vec<f64>> = kept.iter().map(|k| k.1.clone()).collect();
    let diff: Vec<Vec<f64>> = kept.iter().map(|(t, s)| s.iter().zip(t).map(|(a, b)| a - b).collect()).collect();
    let above = kept.iter().filter(|(t, s)| s[0] > t[0]).count();
    Ok(MultiplierResult {
        horizons: (0..len).collect(),
        tax: PathBands::from_paths(&tax, len),
        spend: PathBands::from_paths(&spend, len),
        difference: PathBands::from_paths(&diff, len),
        prob_spend_above_tax_at_impact: above as f64 / kept.len() as f64,
        used: kept.len(),
        excluded,
        flagged: excluded as f64 > 0.01 * draws.len() as f64,
    })
}

/// Structural innovations `e_t(B, π)` of every draw.
pub fn draw_innovations(
    draws: &[PosteriorDraw],
    panel: &TimeSeriesPanel,
    design: &DeterministicDesign,
) -> Result<Vec<DMatrix<f64>>> {
    draws
        .par_iter()
        .map(|d| structural_innovations(panel, design, &d.var, &StructuralMatrix::new(d.b.clone())?))
        .collect()
}

/// Per-draw correlations between each proxy and each innovation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExogeneityReport {
    /// One K×n matrix per draw.
    pub corr: Vec<DMatrix<f64>>,
}

impl ExogeneityReport {
    pub fn values(&self, k: usize, j: usize) -> Vec<f64> {
        self.corr.iter().map(|c| c[(k, j)]).collect()
    }

    pub fn quantile(&self, k: usize, j: usize, tau: f64) -> f64 {
        quantile(&self.values(k, j), tau)
    }

    pub fn prob_below_zero(&self, k: usize, j: usize) -> f64 {
        let v = self.values(k, j);
        v.iter().filter(|&&x| x < 0.0).count() as f64 / v.len().max(1) as f64
    }
}

pub fn exogeneity_report(innovations: &[DMatrix<f64>], proxies: &ProxySet) -> Result<ExogeneityReport> {
    let corr = innovations
        .par_iter()
        .map(|e| {
            if e.nrows() != proxies.nobs() {
                return Err(Error::DimensionMismatch(format!(
                    "{} proxy rows for {} innovations",
                    proxies.nobs(),
                    e.nrows()
                )));
            }
            Ok(DMatrix::from_fn(proxies.nproxies(), e.ncols(), |k, j| {
                correlation(proxies.z().column(k).iter(), e.column(j).iter())
            }))
        })
        .collect::<Result<_>>()?;
    Ok(ExogeneityReport { corr })
}

/// Sample skewness and kurtosis of every shock in every draw: `[draw][shock]`.
pub fn shock_moments(innovations: &[DMatrix<f64>]) -> Result<Vec<Vec<(f64, f64)>>> {
    innovations
        .par_iter()
        .map(|e| {
            (0..e.ncols())
                .map(|j| sample_skewness_kurtosis(e.column(j).as_slice()))
                .collect()
        })
        .collect()
}

/// Elementwise posterior median of the innovations (T×n).
pub fn median_shocks(innovations: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let first = innovations.first().ok_or_else(|| Error::InvalidInput("no draws".into()))?;
    let (t, n) = first.shape();
    if innovations.iter().any(|e| e.shape() != (t, n)) {
        return Err(Error::DimensionMismatch("innovations differ in shape across draws".into()));
    }
    let mut out = DMatrix::zeros(t, n);
    for r in 0..t {
        for c in 0..n {
            out[(r, c)] = quantile(&innovations.iter().map(|e| e[(r, c)]).collect::<Vec<_>>(), 0.5);
        }
    }
    Ok(out)
}

/// Residual of a least-squares regression of `proxy` on a constant and the
/// columns of `shocks`.
pub fn construct_new_proxy(proxy: &[f64], shocks: &DMatrix<f64>) -> Result<Vec<f64>> {
    let t = proxy.len();
    if shocks.nrows() != t {
        return Err(Error::DimensionMismatch(format!("{t} proxy rows, {} shock rows", shocks.nrows())));
    }
    let x = DMatrix::from_fn(t, shocks.ncols() + 1, |r, c| if c == 0 { 1.0 } else { shocks[(r, c - 1)] });
    let y = DMatrix::from_column_slice(t, 1, proxy);
    let coef = least_squares(&x, &y)?;
    let resid = y - x * coef;
    Ok(resid.column(0).iter().copied().collect())
}
