//! Simultaneous-equation parameterization of the (τ, g, y) impact matrix:
//!
//! ```text
//! u_τ = Θ_G σ_G ε_g + Θ_Y u_y + σ_τ ε_τ
//! u_g = γ_τ σ_τ ε_τ + γ_Y u_y + σ_G ε_g
//! u_y = η_τ u_τ + η_G u_g + σ_Y ε_y
//! ```
//!
//! i.e. `(I − Λ) B = Φ`. Flipping the sign of a shock flips only its σ, so
//! the mapping reports |σ|.

use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::error::{Error, Result};

const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MertensParams {
    pub theta_g: f64,
    pub theta_y: f64,
    pub sigma_tau: f64,
    pub gamma_tau: f64,
    pub gamma_y: f64,
    pub sigma_g: f64,
    pub eta_tau: f64,
    pub eta_g: f64,
    pub sigma_y: f64,
}

impl MertensParams {
    pub const NAMES: [&'static str; 9] = [
        "theta_g", "theta_y", "sigma_tau", "gamma_tau", "gamma_y", "sigma_g", "eta_tau", "eta_g", "sigma_y",
    ];

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.theta_g,
            self.theta_y,
            self.sigma_tau,
            self.gamma_tau,
            self.gamma_y,
            self.sigma_g,
            self.eta_tau,
            self.eta_g,
            self.sigma_y,
        ]
    }

    /// `B = (I − Λ)^{-1} Φ`.
    pub fn reconstruct(&self) -> Result<DMatrix<f64>> {
        if !(self.sigma_tau > 0.0 && self.sigma_g > 0.0 && self.sigma_y > 0.0) {
            return Err(Error::Domain("σ_τ, σ_G and σ_Y must be positive".into()));
        }
        let lambda = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.0, self.theta_y, 0.0, 0.0, self.gamma_y, self.eta_tau, self.eta_g, 0.0],
        );
        let phi = DMatrix::from_row_slice(
            3,
            3,
            &[
                self.sigma_tau,
                self.theta_g * self.sigma_g,
                0.0,
                self.gamma_tau * self.sigma_tau,
                self.sigma_g,
                0.0,
                0.0,
                0.0,
                self.sigma_y,
            ],
        );
        let i_lambda = DMatrix::identity(3, 3) - lambda;
        let det = i_lambda.determinant();
        if det.abs() <= DEGENERATE_TOL {
            return Err(Error::MappingDegenerate(format!("I − Λ is singular (det {det:e})")));
        }
        let inv = i_lambda.try_inverse().ok_or_else(|| Error::MappingDegenerate("I − Λ is singular".into()))?;
        Ok(inv * phi)
    }
}

/// Maps an impact matrix with variables and shocks ordered (τ, g, y).
pub fn map_to_mertens(b: &DMatrix<f64>) -> Result<MertensParams> {
    if b.shape() != (3, 3) {
        return Err(Error::DimensionMismatch(format!("expected a 3×3 B, got {}×{}", b.nrows(), b.ncols())));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("B contains non-finite entries".into()));
    }
    let scale = b.amax().max(f64::MIN_POSITIVE);
    let tol = DEGENERATE_TOL * scale;
    if b[(2, 2)].abs() <= tol {
        return Err(Error::MappingDegenerate("B33 is zero".into()));
    }
    let theta_y = b[(0, 2)] / b[(2, 2)];
    let gamma_y = b[(1, 2)] / b[(2, 2)];
    // Row 3 of (I − Λ)B vanishes in the τ and g columns.
    let m = Matrix2::new(b[(0, 0)], b[(1, 0)], b[(0, 1)], b[(1, 1)]);
    if m.determinant().abs() <= tol * scale {
        return Err(Error::MappingDegenerate("the system for η_τ, η_G is singular".into()));
    }
    let eta = m
        .lu()
        .solve(&Vector2::new(b[(2, 0)], b[(2, 1)]))
        .ok_or_else(|| Error::MappingDegenerate("the system for η_τ, η_G is singular".into()))?;
    let (eta_tau, eta_g) = (eta[0], eta[1]);
    let sigma_y = b[(2, 2)] - eta_tau * b[(0, 2)] - eta_g * b[(1, 2)];
    let sigma_tau = b[(0, 0)] - theta_y * b[(2, 0)];
    let sigma_g = b[(1, 1)] - gamma_y * b[(2, 1)];
    if sigma_tau.abs() <= tol || sigma_g.abs() <= tol || sigma_y.abs() <= tol {
        return Err(Error::MappingDegenerate("a structural scale is zero".into()));
    }
    let theta_g = (b[(0, 1)] - theta_y * b[(2, 1)]) / sigma_g;
    let gamma_tau = (b[(1, 0)] - gamma_y * b[(2, 0)]) / sigma_tau;
    Ok(MertensParams {
        theta_g,
        theta_y,
        sigma_tau: sigma_tau.abs(),
        gamma_tau,
        gamma_y,
        sigma_g: sigma_g.abs(),
        eta_tau,
        eta_g,
        sigma_y: sigma_y.abs(),
    })
}
