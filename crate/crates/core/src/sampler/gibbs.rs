//! Conjugate updates for the proxy-moment means and their hyper-variances.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Scale used in place of `b` when `a = b = 0` and `μ = 0` exactly, which
/// would otherwise make the inverse-gamma conditional improper.
pub const IG_FLOOR: f64 = 1e-12;

/// Draw `μ | σ², m ~ N(m σ²/(σ² + v), σ² v/(σ² + v))` where `v = Var(z)/T`.
/// An infinite `σ²` gives `N(m, v)`.
pub fn draw_mu<R: Rng + ?Sized>(m: f64, v: f64, sigma2: f64, rng: &mut R) -> f64 {
    let (mean, var) = if sigma2.is_infinite() {
        (m, v)
    } else {
        let w = sigma2 / (sigma2 + v);
        (m * w, v * w)
    };
    let z: f64 = StandardNormal.sample(rng);
    mean + var.sqrt() * z
}

/// Draw `σ² | μ ~ IG(a + 1/2, b + μ²/2)`.
pub fn draw_sigma2<R: Rng + ?Sized>(mu: f64, a: f64, b: f64, rng: &mut R) -> f64 {
    let shape = a + 0.5;
    let mut rate = b + 0.5 * mu * mu;
    if !(rate > 0.0) {
        rate = IG_FLOOR;
    }
    let g = Gamma::new(shape, 1.0 / rate).expect("positive shape and rate");
    1.0 / g.sample(rng)
}

/// Log density of IG(a, b) up to a constant; `a = b = 0` gives `-ln σ²`.
pub fn ln_inverse_gamma_kernel(sigma2: f64, a: f64, b: f64) -> f64 {
    -(a + 1.0) * sigma2.ln() - b / sigma2
}
