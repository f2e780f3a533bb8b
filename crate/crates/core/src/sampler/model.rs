//! Shared evaluation of the posterior kernel for the optimizer and the chain.

use nalgebra::DMatrix;

use crate::likelihood::{gaussian_log_likelihood_innov, reweight_log_from_moments, ExogeneityMeans, ProxySet};
use crate::proxy::{AugmentedSystem, ProxyBlock};
use crate::shocks::SkewTParams;
use crate::var::SINGULAR_DET_TOL;

use super::Variant;

/// Free entries of B (column-major), skipping zero restrictions.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeLayout {
    n: usize,
    free: Vec<(usize, usize)>,
}

impl FreeLayout {
    pub fn new(n: usize, zeros: &[(usize, usize)]) -> Self {
        let mut free = Vec::with_capacity(n * n);
        for c in 0..n {
            for r in 0..n {
                if !zeros.contains(&(r, c)) {
                    free.push((r, c));
                }
            }
        }
        Self { n, free }
    }

    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn to_vec(&self, b: &DMatrix<f64>) -> Vec<f64> {
        self.free.iter().map(|&(r, c)| b[(r, c)]).collect()
    }

    pub fn to_matrix(&self, v: &[f64]) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.n, self.n);
        for (&(r, c), &x) in self.free.iter().zip(v) {
            b[(r, c)] = x;
        }
        b
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Evaluator {
    pub variant: Variant,
    pub proxies: ProxySet,
    pub aug: Option<AugmentedSystem>,
    pub t: usize,
}

impl Evaluator {
    /// `E = U B^{-T}` and `log|det B|`, or `None` for a numerically singular B.
    pub fn innovations(&self, u: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
        let lu = b.clone().lu();
        let det = lu.determinant();
        if !(det.abs() > SINGULAR_DET_TOL) || !det.is_finite() {
            return None;
        }
        let inv = lu.try_inverse()?;
        Some((u * inv.transpose(), det.abs().ln()))
    }

    pub fn column_ll(e: &DMatrix<f64>, shocks: &[SkewTParams]) -> Vec<f64> {
        shocks
            .iter()
            .enumerate()
            .map(|(i, p)| e.column(i).iter().map(|&x| p.ln_pdf(x)).sum())
            .collect()
    }

    pub fn column_ll_one(e: &DMatrix<f64>, i: usize, p: &SkewTParams) -> f64 {
        e.column(i).iter().map(|&x| p.ln_pdf(x)).sum()
    }

    pub fn likelihood(&self, e: &DMatrix<f64>, logdet: f64, col_ll: &[f64], block: &ProxyBlock) -> f64 {
        match self.variant {
            Variant::NonGaussian | Variant::NonGaussianWeighting => {
                -(self.t as f64) * logdet + col_ll.iter().sum::<f64>()
            }
            Variant::GaussianWeighting => gaussian_log_likelihood_innov(e, logdet),
            Variant::GaussianAugmented => self
                .aug
                .as_ref()
                .expect("augmented variant carries its system")
                .log_likelihood_innov(e, logdet, block)
                .unwrap_or(f64::NEG_INFINITY),
        }
    }

    pub fn moments(&self, e: &DMatrix<f64>) -> DMatrix<f64> {
        if self.proxies.nproxies() == 0 {
            return DMatrix::zeros(0, e.ncols());
        }
        self.proxies.z().transpose() * e / self.t as f64
    }

    pub fn reweight(&self, moments: &DMatrix<f64>, mu: &ExogeneityMeans) -> f64 {
        if self.variant.weights_proxies() && self.proxies.nproxies() > 0 {
            reweight_log_from_moments(moments, &self.proxies, self.t, mu)
        } else {
            0.0
        }
    }
}
