#![allow(dead_code)]

use nalgebra::DMatrix;
use ngproxy::likelihood::ProxySet;
use ngproxy::shocks::{pearson_sample, PearsonMoments};
use ngproxy::var::{DeterministicDesign, TimeSeriesPanel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn b0() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.15, 1.0, -0.5, 0.0, 1.5, 1.0])
}

pub struct Simulated {
    pub panel: TimeSeriesPanel,
    pub design: DeterministicDesign,
    pub proxies: ProxySet,
    pub shocks: DMatrix<f64>,
}

/// `u = B0 ε` with Pearson shocks and the proxy `z = ε_τ + c ε_y + η`,
/// standardized. Shock order is (g, y, τ).
pub fn simulate(t: usize, contamination: f64, seed: u64) -> Simulated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let moments = PearsonMoments::new(0.68, 2.33).unwrap();
    let mut eps = DMatrix::zeros(t, 3);
    for j in 0..3 {
        let col = pearson_sample(moments, &mut rng, t).unwrap();
        eps.set_column(j, &nalgebra::DVector::from_vec(col));
    }
    let eta = pearson_sample(moments, &mut rng, t).unwrap();
    let z = DMatrix::from_fn(t, 1, |r, _| eps[(r, 2)] + contamination * eps[(r, 1)] + eta[r]);
    let u = &eps * b0().transpose();
    Simulated {
        panel: TimeSeriesPanel::from_values(u).unwrap(),
        design: DeterministicDesign::empty(t),
        proxies: ProxySet::standardized(z, vec![2], 3).unwrap(),
        shocks: eps,
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
