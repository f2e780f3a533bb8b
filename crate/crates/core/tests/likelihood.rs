use nalgebra::DMatrix;
use ngproxy::likelihood::*;
use ngproxy::shocks::{pearson_sample, PearsonMoments, SkewTParams};
use ngproxy::var::{DeterministicDesign, ReducedFormVar, StructuralMatrix, TimeSeriesPanel, VarSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Continuous, Normal};

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| Distribution::<f64>::sample(&StandardNormal, rng))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, n, n).qr().q()
}

fn rotation_3(plane: (usize, usize), angle: f64) -> DMatrix<f64> {
    let mut q = DMatrix::identity(3, 3);
    let (c, s) = (angle.cos(), angle.sin());
    q[(plane.0, plane.0)] = c;
    q[(plane.1, plane.1)] = c;
    q[(plane.0, plane.1)] = -s;
    q[(plane.1, plane.0)] = s;
    q
}

fn b0() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.15, 1.0, -0.5, 0.0, 1.5, 1.0])
}

// Lag-free panel with u = y so residuals are the data.
fn static_inputs(u: &DMatrix<f64>) -> (TimeSeriesPanel, DeterministicDesign, ReducedFormVar) {
    let panel = TimeSeriesPanel::from_values(u.clone()).unwrap();
    let design = DeterministicDesign::empty(u.nrows());
    let var = ReducedFormVar::zero(u.ncols(), VarSpec::new(0, false), 0);
    (panel, design, var)
}

#[test]
fn moments_of_exact_copy_are_second_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let e = gaussian_matrix(&mut rng, 500, 3);
    let z = e.column(1).into_owned();
    let proxies = ProxySet::new(DMatrix::from_column_slice(500, 1, z.as_slice()), vec![1], 3).unwrap();
    let m = proxy_moment_stats(&proxies, &e).unwrap();
    let second = e.column(1).norm_squared() / 500.0;
    assert!((m[(0, 1)] - second).abs() < 1e-12);
}

#[test]
fn orthogonal_proxy_has_vanishing_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = 1_000_000;
    let e = gaussian_matrix(&mut rng, t, 3);
    let z = DMatrix::from_fn(t, 1, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
    let proxies = ProxySet::new(z, vec![0], 3).unwrap();
    let m = proxy_moment_stats(&proxies, &e).unwrap();
    assert!(m.iter().all(|v| v.abs() < 0.005), "{m}");
}

#[test]
fn zero_proxy_gives_zero_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let e = gaussian_matrix(&mut rng, 50, 2);
    let proxies = ProxySet::with_variance(DMatrix::zeros(50, 1), vec![0], vec![1.0], 2).unwrap();
    assert!(proxy_moment_stats(&proxies, &e).unwrap().iter().all(|v| *v == 0.0));
    let short = gaussian_matrix(&mut rng, 49, 2);
    assert!(proxy_moment_stats(&proxies, &short).is_err());
}

#[test]
fn proxy_set_validation() {
    let z = DMatrix::from_element(10, 2, 1.0);
    assert!(ProxySet::with_variance(z.clone(), vec![0, 0], vec![1.0, 1.0], 3).is_err());
    assert!(ProxySet::with_variance(z.clone(), vec![0, 3], vec![1.0, 1.0], 3).is_err());
    assert!(ProxySet::with_variance(z.clone(), vec![0, 1], vec![1.0, 0.0], 3).is_err());
    assert!(ProxySet::with_variance(z, vec![0], vec![1.0], 3).is_err());
    assert!(ProxySet::standardized(DMatrix::from_element(10, 1, 4.0), vec![0], 3).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let raw = gaussian_matrix(&mut rng, 200, 1) * 3.0 + DMatrix::from_element(200, 1, 5.0);
    let p = ProxySet::standardized(raw, vec![2], 3).unwrap();
    let col = p.z().column(0);
    assert!((col.sum() / 200.0).abs() < 1e-12);
    assert!((col.norm_squared() / 200.0 - 1.0).abs() < 1e-12);
    assert_eq!(p.non_target_pairs(3), vec![(0, 0), (0, 1)]);
}

#[test]
fn reweight_maximum_when_moments_match_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = 300;
    let e = gaussian_matrix(&mut rng, t, 3);
    let z = gaussian_matrix(&mut rng, t, 2);
    let proxies = ProxySet::with_variance(z, vec![0, 2], vec![1.3, 0.7], 3).unwrap();
    let m = proxy_moment_stats(&proxies, &e).unwrap();
    let mu = ExogeneityMeans::new(m.clone(), DMatrix::from_element(2, 3, 1.0), &proxies).unwrap();
    let value = reweight_log(&proxies, &e, &mu).unwrap();
    let expected: f64 = [1.3f64, 0.7]
        .iter()
        .map(|v| 2.0 * -0.5 * (2.0 * std::f64::consts::PI * v / t as f64).ln())
        .sum();
    assert!((value - expected).abs() < 1e-10);

    // exogenous special case with zero moments
    let zero = ProxySet::with_variance(DMatrix::zeros(t, 2), vec![0, 2], vec![1.3, 0.7], 3).unwrap();
    let v0 = reweight_log(&zero, &e, &ExogeneityMeans::zeros(&zero, 3)).unwrap();
    assert!((v0 - expected).abs() < 1e-10);
}

#[test]
fn reweight_closed_form_single_term() {
    // n = 2, proxy targets shock 0, so one term on shock 1 with m = 0.1.
    let t = 250;
    let mut e = DMatrix::zeros(t, 2);
    let mut z = DMatrix::zeros(t, 1);
    for i in 0..t {
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        z[(i, 0)] = s;
        e[(i, 1)] = 0.1 * s;
    }
    let proxies = ProxySet::with_variance(z, vec![0], vec![1.0], 2).unwrap();
    let value = reweight_log(&proxies, &e, &ExogeneityMeans::zeros(&proxies, 2)).unwrap();
    let closed = -0.5 * (2.0 * std::f64::consts::PI / 250.0).ln() - 1.25;
    let independent = Normal::new(0.0, (1.0f64 / 250.0).sqrt()).unwrap().ln_pdf(0.1);
    assert!((value - closed).abs() < 1e-10);
    assert!((value - independent).abs() < 1e-10);
}

#[test]
fn reweight_is_concave_in_mu_with_argmax_at_moment() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = 100;
    let e = gaussian_matrix(&mut rng, t, 2);
    let z = gaussian_matrix(&mut rng, t, 1);
    let proxies = ProxySet::with_variance(z, vec![0], vec![1.0], 2).unwrap();
    let m = proxy_moment_stats(&proxies, &e).unwrap()[(0, 1)];
    let at = |mu: f64| {
        let mut means = ExogeneityMeans::zeros(&proxies, 2);
        means.set(0, 1, mu, 1.0);
        reweight_log(&proxies, &e, &means).unwrap()
    };
    let h = 1e-3;
    for i in -10..=10 {
        let x = m + i as f64 * 0.05;
        let second = at(x + h) - 2.0 * at(x) + at(x - h);
        assert!(second < 0.0);
        if i != 0 {
            assert!(at(x) < at(m));
        }
    }
}

#[test]
fn exogenous_penalty_grows_with_moment() {
    let t = 250;
    let proxies = ProxySet::with_variance(DMatrix::from_element(t, 1, 1.0), vec![0], vec![1.0], 2).unwrap();
    let mut last = f64::INFINITY;
    for i in 0..20 {
        let c = i as f64 * 0.02;
        let e = DMatrix::from_fn(t, 2, |_, j| if j == 1 { c } else { 0.0 });
        let v = reweight_log(&proxies, &e, &ExogeneityMeans::zeros(&proxies, 2)).unwrap();
        assert!(v < last);
        last = v;
    }
}

#[test]
fn gaussian_trivial_values() {
    let u = DMatrix::from_element(1, 1, 0.0);
    let (p, d, v) = static_inputs(&u);
    let ll = gaussian_log_likelihood(&p, &d, &v, &StructuralMatrix::identity(1)).unwrap();
    assert!((ll + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
}

#[test]
fn gaussian_scaled_b_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let u = gaussian_matrix(&mut rng, 40, 3);
    let (p, d, v) = static_inputs(&u);
    let b2 = StructuralMatrix::new(DMatrix::identity(3, 3) * 2.0).unwrap();
    let ll = gaussian_log_likelihood(&p, &d, &v, &b2).unwrap();
    let n01 = Normal::new(0.0, 1.0).unwrap();
    let direct: f64 = -40.0 * 3.0 * 2f64.ln() + u.iter().map(|x| n01.ln_pdf(x / 2.0)).sum::<f64>();
    assert!((ll - direct).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gaussian_is_rotation_invariant(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = gaussian_matrix(&mut rng, 60, 3);
        let (p, d, v) = static_inputs(&u);
        let b = gaussian_matrix(&mut rng, 3, 3) * 0.4 + DMatrix::identity(3, 3);
        let q = random_orthogonal(&mut rng, 3);
        let l1 = gaussian_log_likelihood(&p, &d, &v, &StructuralMatrix::new(b.clone()).unwrap()).unwrap();
        let l2 = gaussian_log_likelihood(&p, &d, &v, &StructuralMatrix::new(&b * q).unwrap()).unwrap();
        prop_assert!((l1 - l2).abs() < 1e-8);
    }

    #[test]
    fn skewt_sign_flip_invariance(seed in 0u64..10_000, col in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = gaussian_matrix(&mut rng, 60, 3);
        let (p, d, v) = static_inputs(&u);
        let b = gaussian_matrix(&mut rng, 3, 3) * 0.4 + DMatrix::identity(3, 3);
        let shocks: Vec<SkewTParams> = (0..3)
            .map(|_| SkewTParams::new(rng.random_range(-0.9..0.9), rng.random_range(2.5..30.0)).unwrap())
            .collect();
        let mut bf = b.clone();
        bf.column_mut(col).neg_mut();
        let mut flipped = shocks.clone();
        flipped[col] = SkewTParams::new(-shocks[col].lambda(), shocks[col].q()).unwrap();
        let l1 = nongaussian_log_likelihood(&p, &d, &v, &StructuralMatrix::new(b).unwrap(), &shocks).unwrap();
        let l2 = nongaussian_log_likelihood(&p, &d, &v, &StructuralMatrix::new(bf).unwrap(), &flipped).unwrap();
        prop_assert!((l1 - l2).abs() < 1e-8);
    }
}

#[test]
fn skewt_near_gaussian_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u = gaussian_matrix(&mut rng, 250, 3) * 0.7;
    let (p, d, v) = static_inputs(&u);
    let b = StructuralMatrix::new(DMatrix::from_row_slice(3, 3, &[0.8, 0.1, 0.0, 0.2, 0.7, 0.1, 0.0, 0.3, 0.6])).unwrap();
    let shocks = vec![SkewTParams::new(0.0, 50.0).unwrap(); 3];
    let lg = gaussian_log_likelihood(&p, &d, &v, &b).unwrap();
    let ln = nongaussian_log_likelihood(&p, &d, &v, &b, &shocks).unwrap();
    assert!(((ln - lg) / lg).abs() < 0.005, "{ln} vs {lg}");
}

#[test]
fn skewt_single_observation() {
    let u = DMatrix::from_element(1, 1, 0.37);
    let (p, d, v) = static_inputs(&u);
    let s = SkewTParams::new(0.4, 6.0).unwrap();
    let ll = nongaussian_log_likelihood(&p, &d, &v, &StructuralMatrix::identity(1), &[s]).unwrap();
    assert_eq!(ll, s.ln_pdf(0.37));
    assert!(nongaussian_log_likelihood(&p, &d, &v, &StructuralMatrix::identity(1), &[s, s]).is_err());
}

#[test]
fn skewt_prefers_true_impact_over_rotation() {
    let target = PearsonMoments::new(0.68, 2.33).unwrap();
    let shocks = vec![SkewTParams::new(0.3, 4.0).unwrap(); 3];
    let b_true = StructuralMatrix::new(b0()).unwrap();
    let b_rot = StructuralMatrix::new(b0() * rotation_3((0, 2), 30f64.to_radians())).unwrap();
    let t = 10_000;
    let mut wins = 0;
    for rep in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + rep);
        let eps: Vec<f64> = pearson_sample(target, &mut rng, 3 * t).unwrap();
        let e = DMatrix::from_column_slice(t, 3, &eps);
        let u = &e * b0().transpose();
        let l_true = nongaussian_log_likelihood_resid(&u, &b_true, &shocks).unwrap();
        let l_rot = nongaussian_log_likelihood_resid(&u, &b_rot, &shocks).unwrap();
        if l_true > l_rot {
            wins += 1;
        }
    }
    assert!(wins >= 95, "{wins} of 100");
}

#[test]
fn noiseless_generator_values_are_finite() {
    let u = DMatrix::zeros(20, 3);
    let (p, d, v) = static_inputs(&u);
    let b = StructuralMatrix::new(b0()).unwrap();
    let shocks = vec![SkewTParams::new(0.2, 5.0).unwrap(); 3];
    assert!(gaussian_log_likelihood(&p, &d, &v, &b).unwrap().is_finite());
    assert!(nongaussian_log_likelihood(&p, &d, &v, &b, &shocks).unwrap().is_finite());
}
