//! Synthetic stand-in for the quarterly fiscal dataset (1950Q2–2006Q4).
//!
//! Levels are 100 × log per-capita series: a deterministic trend plus a
//! VAR(1) in deviations driven by skewed-t shocks through a fixed impact
//! matrix. The tax proxy is narrative-like (zero in most quarters) and leans
//! on the output shock; the TFP proxy leans on the spending shock.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::shocks::SkewTParams;

use super::data::{Quarter, DUMMY_QUARTER};

pub const FIXTURE_SEED: u64 = 20_061_231;
pub const FIXTURE_QUARTERS: usize = 227;

/// Impact matrix of the fixture, variables and shocks ordered (τ, g, y).
pub fn fixture_impact() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 1.5, 0.2, 1.2, 0.0, -0.3, 0.15, 0.8])
}

/// CSV text of the fixture with header `date,tax,spend,output,tax_proxy,tfp_proxy`.
pub fn synthetic_csv(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = fixture_impact();
    let a = DMatrix::from_row_slice(3, 3, &[0.85, 0.05, 0.10, 0.02, 0.93, 0.03, 0.04, 0.06, 0.88]);
    let shapes = [(-0.4, 4.0), (0.1, 5.0), (-0.3, 4.0)].map(|(l, q)| SkewTParams::new(l, q).expect("valid shape"));
    let base = DVector::from_column_slice(&[650.0, 620.0, 930.0]);
    let growth = DVector::from_column_slice(&[0.55, 0.45, 0.5]);

    let mut out = String::from("date,tax,spend,output,tax_proxy,tfp_proxy\n");
    let mut x = DVector::zeros(3);
    let mut date = Quarter::new(1950, 2).expect("valid quarter");
    for t in 0..FIXTURE_QUARTERS {
        let eps = DVector::from_iterator(3, shapes.iter().map(|s| s.draw(&mut rng)));
        x = &a * &x + &b * &eps;
        let mut level = &base + &growth * t as f64 + &x;
        if date == DUMMY_QUARTER {
            level[0] -= 3.0;
        }
        let narrative = rng.random::<f64>() < 0.2;
        let n1: f64 = rng.sample(StandardNormal);
        let n2: f64 = rng.sample(StandardNormal);
        let tax_proxy = if narrative { eps[0] - 0.3 * eps[2] + 0.5 * n1 } else { 0.0 };
        let tfp_proxy = eps[2] - 0.2 * eps[1] + 0.7 * n2;
        writeln!(
            out,
            "{date},{:.6},{:.6},{:.6},{:.6},{:.6}",
            level[0], level[1], level[2], tax_proxy, tfp_proxy
        )
        .unwrap();
        date = date.next();
    }
    out
}
