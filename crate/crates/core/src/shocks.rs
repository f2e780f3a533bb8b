//! Shock distributions: the zero-mean, unit-variance skewed t used in the
//! likelihood, a Pearson-system sampler for simulation designs, and sample
//! moment utilities.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal, StudentT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Admissible skewness shape range during estimation.
pub const LAMBDA_BOUNDS: (f64, f64) = (-0.99, 0.99);
/// Admissible tail parameter range during estimation.
pub const Q_BOUNDS: (f64, f64) = (2.1, 100.0);

/// Skewed-t shape `(λ, q)` with the location/scale normalizers `(m, v)` that
/// give the density mean zero and variance one.
///
/// The density is a two-piece scaled Student t with `2q` degrees of freedom:
/// scale `v(1 + λ)` right of `-m` and `v(1 - λ)` left of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewTParams {
    lambda: f64,
    q: f64,
    m: f64,
    v: f64,
    log_norm: f64,
    inv_scale_pos: f64,
    inv_scale_neg: f64,
}

impl SkewTParams {
    pub fn new(lambda: f64, q: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda.abs() < 1.0) {
            return Err(Error::Domain(format!("skew-t λ must satisfy |λ| < 1, got {lambda}")));
        }
        if !(q.is_finite() && q > 2.0) {
            return Err(Error::Domain(format!("skew-t q must exceed 2, got {q}")));
        }
        let l2 = lambda * lambda;
        // Γ(q - 1/2) / Γ(q)
        let ratio = (ln_gamma(q - 0.5) - ln_gamma(q)).exp();
        let bracket = (3.0 * l2 + 1.0) / (2.0 * q - 2.0) - 4.0 * l2 / PI * ratio * ratio;
        let v = q.powf(-0.5) / bracket.sqrt();
        let m = 2.0 * v * lambda * q.sqrt() * ratio / PI.sqrt();
        let log_norm = ln_gamma(q + 0.5) - v.ln() - 0.5 * (PI * q).ln() - ln_gamma(q);
        let qv2 = q * v * v;
        Ok(Self {
            lambda,
            q,
            m,
            v,
            log_norm,
            inv_scale_pos: 1.0 / (qv2 * (1.0 + lambda).powi(2)),
            inv_scale_neg: 1.0 / (qv2 * (1.0 - lambda).powi(2)),
        })
    }

    /// Parameters with the estimation bounds enforced.
    pub fn bounded(lambda: f64, q: f64) -> Result<Self> {
        if lambda < LAMBDA_BOUNDS.0 || lambda > LAMBDA_BOUNDS.1 || q < Q_BOUNDS.0 || q > Q_BOUNDS.1 {
            return Err(Error::Domain(format!(
                "(λ, q) = ({lambda}, {q}) outside estimation bounds"
            )));
        }
        Self::new(lambda, q)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// Log density. `sign(0)` is taken as +1.
    #[inline]
    pub fn ln_pdf(&self, eps: f64) -> f64 {
        let y = eps + self.m;
        let inv = if y >= 0.0 { self.inv_scale_pos } else { self.inv_scale_neg };
        self.log_norm - (self.q + 0.5) * (y * y * inv).ln_1p()
    }

    /// Sum of log densities over a slice.
    pub fn ln_pdf_sum(&self, xs: &[f64]) -> f64 {
        xs.iter().map(|&x| self.ln_pdf(x)).sum()
    }

    /// One draw via the two-piece Student-t representation.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let t = StudentT::new(2.0 * self.q).expect("q > 2");
        let mag: f64 = t.sample(rng);
        let mag = mag.abs() / std::f64::consts::SQRT_2;
        let u: f64 = rng.random();
        let y = if u < 0.5 * (1.0 + self.lambda) {
            self.v * (1.0 + self.lambda) * mag
        } else {
            -self.v * (1.0 - self.lambda) * mag
        };
        y - self.m
    }
}

/// Log density of the skewed t at `eps`.
pub fn skewt_log_density(eps: f64, params: &SkewTParams) -> f64 {
    params.ln_pdf(eps)
}

/// `count` independent skewed-t draws.
pub fn skewt_sample<R: Rng + ?Sized>(params: &SkewTParams, rng: &mut R, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    Ok((0..count).map(|_| params.draw(rng)).collect())
}

/// Target moments for a standardized Pearson variate (mean 0, variance 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearsonMoments {
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl PearsonMoments {
    pub fn new(skewness: f64, excess_kurtosis: f64) -> Result<Self> {
        if !(skewness.is_finite() && excess_kurtosis.is_finite()) {
            return Err(Error::Domain("Pearson moments must be finite".into()));
        }
        if excess_kurtosis <= skewness * skewness - 2.0 {
            return Err(Error::Domain(format!(
                "no distribution has skewness {skewness} and excess kurtosis {excess_kurtosis} (need k > s² - 2)"
            )));
        }
        Ok(Self {
            skewness,
            excess_kurtosis,
        })
    }
}

/// Member of the Pearson family selected by the four moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PearsonType {
    Normal,
    /// Beta on a bounded interval (includes the symmetric type II).
    I,
    /// Shifted gamma.
    III,
    /// Skewed heavy-tailed; symmetric case is type VII (scaled t).
    IV,
    /// Shifted inverse gamma.
    V,
    /// Shifted beta prime.
    VI,
}

#[derive(Debug, Clone, Copy)]
enum Member {
    Normal,
    Beta { lo: f64, width: f64, a: f64, b: f64 },
    Gamma { shift: f64, shape: f64, scale: f64 },
    TypeIV { loc: f64, scale: f64, m: f64, nu: f64 },
    InvGamma { shift: f64, shape: f64, scale: f64 },
    BetaPrime { shift: f64, width: f64, a: f64, b: f64 },
}

/// Standardized Pearson distribution fitted to `(skewness, excess kurtosis)`.
///
/// Works from the Pearson differential equation
/// `d ln f / dx = -(A x + C1) / (C0 + C1 x + C2 x²)` with coefficients written
/// in terms of β1 = s² and β2 = k + 3 and scaled by `A = 10β2 - 12β1 - 18`, so
/// the boundary cases `A = 0` (e.g. the uniform) need no special handling.
/// Negative skewness is handled by mirroring the positive-skew member.
#[derive(Debug, Clone, Copy)]
pub struct PearsonDistribution {
    member: Member,
    kind: PearsonType,
    mirrored: bool,
}

const CLASSIFY_TOL: f64 = 1e-9;

impl PearsonDistribution {
    pub fn from_moments(moments: PearsonMoments) -> Result<Self> {
        let moments = PearsonMoments::new(moments.skewness, moments.excess_kurtosis)?;
        let s = moments.skewness.abs();
        let mirrored = moments.skewness < 0.0;
        let b1 = s * s;
        let b2 = moments.excess_kurtosis + 3.0;
        let a = 10.0 * b2 - 12.0 * b1 - 18.0;
        let c0 = 4.0 * b2 - 3.0 * b1;
        let c1 = s * (b2 + 3.0);
        let c2 = 2.0 * b2 - 3.0 * b1 - 6.0;
        let scale = c0.abs().max(c1.abs()).max(1.0);
        let tol = CLASSIFY_TOL * scale;

        let (member, kind) = if c2.abs() <= tol {
            if c1.abs() <= tol {
                (Member::Normal, PearsonType::Normal)
            } else {
                // Gamma on w = x + C0/C1 > 0 with shape A C0 / C1² and rate A / C1.
                let shape = a * c0 / (c1 * c1);
                let rate = a / c1;
                if shape <= 0.0 || rate <= 0.0 {
                    return Err(Error::Domain("degenerate Pearson type III parameters".into()));
                }
                (
                    Member::Gamma {
                        shift: -c0 / c1,
                        shape,
                        scale: 1.0 / rate,
                    },
                    PearsonType::III,
                )
            }
        } else {
            let disc = c1 * c1 - 4.0 * c0 * c2;
            if disc < -tol * scale {
                let loc = -c1 / (2.0 * c2);
                let sc2 = c0 / c2 - loc * loc;
                if sc2 <= 0.0 || c2 <= 0.0 {
                    return Err(Error::Domain("degenerate Pearson type IV parameters".into()));
                }
                let sc = sc2.sqrt();
                let m = a / (2.0 * c2);
                let nu = (a * loc + c1) / (c2 * sc);
                if m <= 1.0 {
                    return Err(Error::Domain(format!("Pearson type IV exponent m = {m} too small")));
                }
                (
                    Member::TypeIV {
                        loc,
                        scale: sc,
                        m,
                        nu,
                    },
                    PearsonType::IV,
                )
            } else if disc.abs() <= tol * scale {
                let r = -c1 / (2.0 * c2);
                let shape = a / c2 - 1.0;
                let beta = -(a * r + c1) / c2;
                if shape <= 0.0 || beta <= 0.0 || r >= 0.0 {
                    return Err(Error::Domain("degenerate Pearson type V parameters".into()));
                }
                (
                    Member::InvGamma {
                        shift: r,
                        shape,
                        scale: beta,
                    },
                    PearsonType::V,
                )
            } else {
                let sq = disc.sqrt();
                let (ra, rb) = ((-c1 - sq) / (2.0 * c2), (-c1 + sq) / (2.0 * c2));
                let (r1, r2) = if ra < rb { (ra, rb) } else { (rb, ra) };
                let alpha1 = (a * r1 + c1) / (r1 - r2);
                let alpha2 = (a * r2 + c1) / (r2 - r1);
                let e1 = -alpha1 / c2;
                let e2 = -alpha2 / c2;
                if r1 < 0.0 && 0.0 < r2 {
                    if e1 <= -1.0 || e2 <= -1.0 {
                        return Err(Error::Domain("degenerate Pearson type I exponents".into()));
                    }
                    (
                        Member::Beta {
                            lo: r1,
                            width: r2 - r1,
                            a: e1 + 1.0,
                            b: e2 + 1.0,
                        },
                        PearsonType::I,
                    )
                } else if r2 < 0.0 {
                    // f ∝ w^{e2} (1 + w)^{e1} with w = (x - r2)/(r2 - r1).
                    let pa = e2 + 1.0;
                    let pb = -e1 - e2 - 1.0;
                    if pa <= 0.0 || pb <= 0.0 {
                        return Err(Error::Domain("degenerate Pearson type VI exponents".into()));
                    }
                    (
                        Member::BetaPrime {
                            shift: r2,
                            width: r2 - r1,
                            a: pa,
                            b: pb,
                        },
                        PearsonType::VI,
                    )
                } else {
                    return Err(Error::Domain("Pearson roots inconsistent with a zero mean".into()));
                }
            }
        };
        Ok(Self {
            member,
            kind,
            mirrored,
        })
    }

    pub fn kind(&self) -> PearsonType {
        self.kind
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        let sign = if self.mirrored { -1.0 } else { 1.0 };
        match self.member {
            Member::Normal => {
                let d = Normal::new(0.0, 1.0).expect("unit normal");
                (0..count).map(|_| d.sample(rng)).collect()
            }
            Member::Beta { lo, width, a, b } => {
                let d = Beta::new(a, b).expect("validated beta shapes");
                (0..count).map(|_| sign * (lo + width * d.sample(rng))).collect()
            }
            Member::Gamma { shift, shape, scale } => {
                let d = Gamma::new(shape, scale).expect("validated gamma");
                (0..count).map(|_| sign * (shift + d.sample(rng))).collect()
            }
            Member::InvGamma { shift, shape, scale } => {
                let d = Gamma::new(shape, 1.0 / scale).expect("validated inverse gamma");
                (0..count).map(|_| sign * (shift + 1.0 / d.sample(rng))).collect()
            }
            Member::BetaPrime { shift, width, a, b } => {
                let ga = Gamma::new(a, 1.0).expect("validated shape");
                let gb = Gamma::new(b, 1.0).expect("validated shape");
                (0..count)
                    .map(|_| {
                        let w = ga.sample(rng) / gb.sample(rng);
                        sign * (shift + width * w)
                    })
                    .collect()
            }
            Member::TypeIV { loc, scale, m, nu } => {
                let env = TangentEnvelope::type_iv(m, nu);
                (0..count)
                    .map(|_| sign * (loc + scale * env.sample(rng).tan()))
                    .collect()
            }
        }
    }
}

/// Draws from a standardized Pearson distribution with the given skewness and
/// excess kurtosis.
pub fn pearson_sample<R: Rng + ?Sized>(moments: PearsonMoments, rng: &mut R, count: usize) -> Result<Vec<f64>> {
    let dist = PearsonDistribution::from_moments(moments)?;
    Ok(dist.sample(rng, count))
}

/// Piecewise-exponential envelope for a log-concave density on an interval,
/// built from tangents at fixed abscissae. Used for the type IV angle
/// `θ = atan((x - loc)/scale)`, whose log density
/// `(2m - 2) ln cos θ - ν θ` is concave on (-π/2, π/2).
struct TangentEnvelope {
    m: f64,
    nu: f64,
    // Piece i covers [edges[i], edges[i+1]] with envelope exp(a_i + b_i θ - peak).
    edges: Vec<f64>,
    intercepts: Vec<f64>,
    slopes: Vec<f64>,
    cum_mass: Vec<f64>,
}

impl TangentEnvelope {
    fn type_iv(m: f64, nu: f64) -> Self {
        let k = 2.0 * m - 2.0;
        let h = |t: f64| k * t.cos().ln() - nu * t;
        let dh = |t: f64| -k * t.tan() - nu;
        let mode = (-nu / k).atan();
        // Curvature at the mode sets the tangent spacing.
        let sd = mode.cos() / k.sqrt();
        let mut points: Vec<f64> = [-3.0, -1.5, -0.5, 0.5, 1.5, 3.0]
            .iter()
            .map(|z| mode + z * sd)
            .filter(|t| t.abs() < FRAC_PI_2 - 1e-6)
            .collect();
        if points.len() < 2 {
            points = vec![mode - 0.1 * sd, mode + 0.1 * sd];
        }
        let hv: Vec<f64> = points.iter().map(|&t| h(t)).collect();
        let slopes: Vec<f64> = points.iter().map(|&t| dh(t)).collect();
        let mut edges = vec![-FRAC_PI_2];
        for i in 0..points.len() - 1 {
            let num = hv[i + 1] - hv[i] - points[i + 1] * slopes[i + 1] + points[i] * slopes[i];
            edges.push(num / (slopes[i] - slopes[i + 1]));
        }
        edges.push(FRAC_PI_2);
        let peak = h(mode);
        let intercepts: Vec<f64> = (0..points.len()).map(|i| hv[i] - slopes[i] * points[i]).collect();
        let mut cum_mass = Vec::with_capacity(points.len());
        let mut total = 0.0;
        for i in 0..points.len() {
            total += piece_mass(intercepts[i] - peak, slopes[i], edges[i], edges[i + 1]);
            cum_mass.push(total);
        }
        Self {
            m,
            nu,
            edges,
            intercepts,
            slopes,
            cum_mass,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = *self.cum_mass.last().expect("non-empty envelope");
        let k = 2.0 * self.m - 2.0;
        loop {
            let u: f64 = rng.random::<f64>() * total;
            let i = self
                .cum_mass
                .iter()
                .position(|&c| u <= c)
                .unwrap_or(self.cum_mass.len() - 1);
            let (lo, hi) = (self.edges[i], self.edges[i + 1]);
            let b = self.slopes[i];
            let v: f64 = rng.random();
            // Inverse CDF of exp(b θ) on [lo, hi], anchored at the heavier end.
            let t = if b.abs() < 1e-12 {
                lo + v * (hi - lo)
            } else if b > 0.0 {
                hi + (v + (1.0 - v) * (b * (lo - hi)).exp()).ln() / b
            } else {
                lo + ((1.0 - v) + v * (b * (hi - lo)).exp()).ln() / b
            };
            if !(t > -FRAC_PI_2 && t < FRAC_PI_2) {
                continue;
            }
            let log_env = self.intercepts[i] + b * t;
            let log_target = k * t.cos().ln() - self.nu * t;
            let w: f64 = rng.random();
            if w.ln() <= log_target - log_env {
                return t;
            }
        }
    }
}

fn piece_mass(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    if b.abs() < 1e-12 {
        a.exp() * (hi - lo)
    } else {
        (a + b * hi).exp() / b - (a + b * lo).exp() / b
    }
}

/// Population skewness and raw kurtosis (Gaussian = 3).
pub fn sample_skewness_kurtosis(x: &[f64]) -> Result<(f64, f64)> {
    if x.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 observations for skewness/kurtosis, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= f64::EPSILON * mean.abs().max(1.0) * 1e-3 || m2 == 0.0 {
        return Err(Error::Degenerate("constant sample has no skewness or kurtosis".into()));
    }
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2)))
}

/// Jarque–Bera statistic `n/6 (S² + (K - 3)²/4)`.
pub fn jarque_bera(x: &[f64]) -> Result<f64> {
    let (s, k) = sample_skewness_kurtosis(x)?;
    Ok(x.len() as f64 / 6.0 * (s * s + 0.25 * (k - 3.0).powi(2)))
}
