//! Adaptive Gaussian random-walk proposals.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// One Metropolis block: proposal `x + exp(s) L z` with `L L' = Σ`.
///
/// During burn-in the log scale `s` follows a Robbins–Monro recursion toward
/// the target acceptance rate at the end of every window, and once enough
/// draws have been seen `Σ` is replaced by `2.38²/d` times their empirical
/// covariance (accumulation restarts at windows 4, 8, 16, ...). After
/// [`freeze`](Self::freeze) nothing changes.
#[derive(Debug, Clone)]
pub struct RandomWalkBlock {
    name: String,
    dim: usize,
    chol: DMatrix<f64>,
    log_scale: f64,
    window_accepted: usize,
    window_proposed: usize,
    accepted: usize,
    proposed: usize,
    windows: usize,
    frozen: bool,
    seen: usize,
    sum: DVector<f64>,
    sum_outer: DMatrix<f64>,
}

impl RandomWalkBlock {
    pub fn new(name: impl Into<String>, cov: &DMatrix<f64>) -> Self {
        let dim = cov.nrows();
        Self {
            name: name.into(),
            dim,
            chol: robust_cholesky(cov),
            log_scale: 0.0,
            window_accepted: 0,
            window_proposed: 0,
            accepted: 0,
            proposed: 0,
            windows: 0,
            frozen: false,
            seen: 0,
            sum: DVector::zeros(dim),
            sum_outer: DMatrix::zeros(dim, dim),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn propose<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(rng));
        let step = &self.chol * z * self.log_scale.exp();
        x.iter().zip(step.iter()).map(|(a, b)| a + b).collect()
    }

    pub fn record(&mut self, accepted: bool) {
        self.window_proposed += 1;
        self.proposed += 1;
        if accepted {
            self.window_accepted += 1;
            self.accepted += 1;
        }
    }

    /// Accumulates the current state for covariance adaptation.
    pub fn observe(&mut self, x: &[f64]) {
        if self.frozen {
            return;
        }
        let v = DVector::from_column_slice(x);
        self.sum += &v;
        self.sum_outer += &v * v.transpose();
        self.seen += 1;
    }

    /// Closes an adaptation window. Returns the number of acceptances in it.
    pub fn end_window(&mut self, target: f64) -> usize {
        let acc = self.window_accepted;
        if !self.frozen && self.window_proposed > 0 {
            self.windows += 1;
            let rate = acc as f64 / self.window_proposed as f64;
            self.log_scale += (rate - target) / (self.windows as f64).sqrt();
            self.log_scale = self.log_scale.clamp(-12.0, 6.0);
            if self.seen >= (20 * self.dim).max(100) {
                let n = self.seen as f64;
                let mean = &self.sum / n;
                let cov = &self.sum_outer / n - &mean * mean.transpose();
                let scaled = cov * (2.38f64.powi(2) / self.dim as f64);
                if scaled.iter().all(|v| v.is_finite()) && scaled.diagonal().iter().all(|v| *v > 0.0) {
                    self.chol = robust_cholesky(&scaled);
                }
            }
            // Forget early draws at windows 4, 8, 16, ... so transients from
            // the starting point do not persist in the covariance.
            if self.windows >= 4 && self.windows.is_power_of_two() {
                self.seen = 0;
                self.sum.fill(0.0);
                self.sum_outer.fill(0.0);
            }
        }
        self.window_accepted = 0;
        self.window_proposed = 0;
        acc
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Cholesky factor of a symmetric matrix, repairing non-positive-definite
/// input by clamping eigenvalues at a small floor.
pub fn robust_cholesky(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (cov + cov.transpose()) * 0.5;
    if let Some(c) = sym.clone().cholesky() {
        return c.l();
    }
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    let vals = eig.eigenvalues.map(|v| v.max(max * 1e-8));
    let fixed = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    fixed
        .clone()
        .cholesky()
        .map(|c| c.l())
        .unwrap_or_else(|| DMatrix::from_diagonal(&vals.map(f64::sqrt)))
}
