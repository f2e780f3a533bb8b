use nalgebra::DMatrix;
use ngproxy::likelihood::{gaussian_log_likelihood_resid, ProxySet};
use ngproxy::proxy::*;
use ngproxy::shocks::{pearson_sample, PearsonMoments};
use ngproxy::var::StructuralMatrix;
use ngproxy::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| Distribution::<f64>::sample(&StandardNormal, rng))
}

fn b0() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.15, 1.0, -0.5, 0.0, 1.5, 1.0])
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn ratio_with_exact_copy_is_regression_coefficient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u = gaussian_matrix(&mut rng, 200, 3);
    let z: Vec<f64> = u.column(1).iter().copied().collect();
    let r = iv_impact_ratio(&z, &u, 1, DEFAULT_WEAK_GUARD).unwrap();
    let uii = u.column(1).dot(&u.column(1));
    for j in 0..3 {
        let expected = if j == 1 { 1.0 } else { u.column(j).dot(&u.column(1)) / uii };
        assert!((r[j] - expected).abs() < 1e-12);
    }
    assert_eq!(r[1], 1.0);
}

#[test]
fn ratio_recovers_dgp_column_in_large_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = 1_000_000;
    let target = PearsonMoments::new(0.68, 2.33).unwrap();
    let eps = DMatrix::from_column_slice(t, 3, &pearson_sample(target, &mut rng, 3 * t).unwrap());
    let noise = pearson_sample(target, &mut rng, t).unwrap();
    let u = &eps * b0().transpose();
    let z: Vec<f64> = (0..t).map(|r| eps[(r, 2)] + noise[r]).collect();
    // tax shock is column 2; normalize on its own-variable response
    let r = iv_impact_ratio(&z, &u, 2, DEFAULT_WEAK_GUARD).unwrap();
    assert!((r[1] - (-0.5)).abs() < 0.01, "{}", r[1]);
    assert!(r[0].abs() < 0.01);
}

#[test]
fn orthogonal_proxy_trips_weak_guard() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in [50, 500, 5000] {
        let u = gaussian_matrix(&mut rng, t, 3);
        let raw = gaussian_matrix(&mut rng, t, 1);
        // residualize on u so Σ z u_j = 0 up to rounding
        let coef = (u.transpose() * &u).try_inverse().unwrap() * u.transpose() * &raw;
        let z = &raw - &u * coef;
        let err = iv_impact_ratio(z.as_slice(), &u, 0, DEFAULT_WEAK_GUARD).unwrap_err();
        assert!(matches!(err, Error::WeakProxy { .. }));
    }
}

#[test]
fn ratio_invariances() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = gaussian_matrix(&mut rng, 300, 3);
    let z: Vec<f64> = (0..300).map(|r| u[(r, 0)] + rng.random::<f64>()).collect();
    let base = iv_impact_ratio(&z, &u, 0, DEFAULT_WEAK_GUARD).unwrap();
    for c in [2.0, -0.5, 8.0] {
        let zc: Vec<f64> = z.iter().map(|v| v * c).collect();
        assert_eq!(iv_impact_ratio(&zc, &u, 0, DEFAULT_WEAK_GUARD).unwrap(), base);
    }
    let zc: Vec<f64> = z.iter().map(|v| v * 3.7).collect();
    let scaled = iv_impact_ratio(&zc, &u, 0, DEFAULT_WEAK_GUARD).unwrap();
    assert!((scaled - &base).amax() < 1e-12);

    let raw = gaussian_matrix(&mut rng, 300, 1);
    let coef = (u.transpose() * &u).try_inverse().unwrap() * u.transpose() * &raw;
    let orth = &raw - &u * coef;
    let zo: Vec<f64> = z.iter().zip(orth.iter()).map(|(a, b)| a + b).collect();
    let shifted = iv_impact_ratio(&zo, &u, 0, DEFAULT_WEAK_GUARD).unwrap();
    assert!((shifted - base).amax() < 1e-10);
}

#[test]
fn augmented_structure_has_exogeneity_zeros() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let z = gaussian_matrix(&mut rng, 100, 1);
    let proxies = ProxySet::new(z, vec![2], 3).unwrap();
    let sys = build_augmented(3, &DMatrix::zeros(100, 0), &proxies, AugmentedConfig::simplified()).unwrap();
    let block = ProxyBlock {
        loadings: vec![0.8],
        log_noise_scale: vec![0.3],
    };
    let s = sys.stacked_impact(&b0(), &block);
    assert_eq!(s.shape(), (4, 4));
    assert!(s.view((0, 3), (3, 1)).iter().all(|v| *v == 0.0));
    let free: Vec<f64> = s.view((3, 0), (1, 3)).iter().copied().filter(|v| *v != 0.0).collect();
    assert_eq!(free, vec![0.8]);
    // simplified flag pins Σ_η at one
    assert_eq!(s[(3, 3)], 1.0);
}

#[test]
fn augmented_likelihood_matches_stacked_gaussian() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = 120;
    let u = gaussian_matrix(&mut rng, t, 3);
    let z = gaussian_matrix(&mut rng, t, 2);
    let proxies = ProxySet::new(z, vec![0, 2], 3).unwrap();
    let x = gaussian_matrix(&mut rng, t, 2);
    for config in [AugmentedConfig::simplified(), AugmentedConfig::general()] {
        let sys = build_augmented(3, &x, &proxies, config).unwrap();
        let block = ProxyBlock {
            loadings: vec![0.6, -0.4],
            log_noise_scale: vec![-0.2, 0.5],
        };
        let b = StructuralMatrix::new(b0()).unwrap();
        let fast = sys.log_likelihood(&u, &b, &block).unwrap();
        let full = StructuralMatrix::new(sys.stacked_impact(&b0(), &block)).unwrap();
        let direct = gaussian_log_likelihood_resid(&sys.stacked_residuals(&u), &full).unwrap();
        assert!((fast - direct).abs() < 1e-9, "{fast} vs {direct}");
    }
}

#[test]
fn augmented_without_proxies_is_plain_svar() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u = gaussian_matrix(&mut rng, 80, 3);
    let sys = build_augmented(3, &DMatrix::zeros(80, 0), &ProxySet::none(80), AugmentedConfig::general()).unwrap();
    let b = StructuralMatrix::new(b0()).unwrap();
    let a = sys.log_likelihood(&u, &b, &ProxyBlock::new(0)).unwrap();
    let plain = gaussian_log_likelihood_resid(&u, &b).unwrap();
    assert!((a - plain).abs() < 1e-10);
}

#[test]
fn augmented_rejects_misaligned_samples() {
    let proxies = ProxySet::new(DMatrix::from_fn(50, 1, |r, _| r as f64), vec![0], 3).unwrap();
    assert!(build_augmented(3, &DMatrix::zeros(49, 0), &proxies, AugmentedConfig::simplified()).is_err());
}

// A censored narrative proxy cannot be written as Φ ε + η with η independent
// of ε: the linear-fit residual's size moves with |ε|.
#[test]
fn censored_proxy_breaks_independent_measurement_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t = 10_000;
    let mut eps = Vec::with_capacity(t);
    let mut z = Vec::with_capacity(t);
    for _ in 0..t {
        let e: f64 = StandardNormal.sample(&mut rng);
        let eta: f64 = StandardNormal.sample(&mut rng);
        let psi = if rng.random::<f64>() < 0.3 { 1.0 } else { 0.0 };
        eps.push(e);
        z.push(psi * (e + 0.2 * eta));
    }
    let phi = z.iter().zip(&eps).map(|(a, b)| a * b).sum::<f64>() / eps.iter().map(|v| v * v).sum::<f64>();
    let eta_hat: Vec<f64> = z.iter().zip(&eps).map(|(a, b)| (a - phi * b).abs()).collect();
    let abs_eps: Vec<f64> = eps.iter().map(|v| v.abs()).collect();
    assert!(corr(&eta_hat, &abs_eps) > 0.1);
}
