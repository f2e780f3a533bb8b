mod common;

use common::{b0, median, simulate};
use nalgebra::DMatrix;
use ngproxy::likelihood::{proxy_moment_stats, ProxySet};
use ngproxy::sampler::adapt::RandomWalkBlock;
use ngproxy::sampler::first_step::{first_step_estimate, first_step_estimate_from, FirstStepOptions};
use ngproxy::sampler::gibbs::{draw_mu, draw_sigma2};
use ngproxy::sampler::labeling::{align_to_reference, proxy_label_shocks, signperm_accept};
use ngproxy::sampler::{run_chain, ChainConfig, LabelingMode, ModelSpec, Variant};
use ngproxy::shocks::SkewTParams;
use ngproxy::var::{DeterministicDesign, TimeSeriesPanel, VarSpec};
use ngproxy::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, rng)
}

fn permutation_matrix(perm: &[usize]) -> DMatrix<f64> {
    let n = perm.len();
    DMatrix::from_fn(n, n, |r, c| if perm[c] == r { 1.0 } else { 0.0 })
}

fn skewt_panel(b: &DMatrix<f64>, shocks: &[SkewTParams], t: usize, seed: u64) -> TimeSeriesPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shocks.len();
    let eps = DMatrix::from_fn(t, n, |_, j| shocks[j].draw(&mut rng));
    TimeSeriesPanel::from_values(&eps * b.transpose()).unwrap()
}

fn static_spec(variant: Variant) -> ModelSpec {
    ModelSpec::new(variant, VarSpec::new(0, false))
}

#[test]
fn mu_update_with_flat_hyperprior_centres_on_moment() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t = 400;
    let z = DMatrix::from_fn(t, 1, |_, _| normal(&mut rng));
    let e = DMatrix::from_fn(t, 3, |r, c| 0.3 * z[(r, 0)] * (c as f64) + normal(&mut rng));
    let proxies = ProxySet::new(z, vec![0], 3).unwrap();
    let m = proxy_moment_stats(&proxies, &e).unwrap();
    let v = proxies.variance()[0] / t as f64;
    for j in 1..3 {
        let n = 20_000;
        let mean = (0..n).map(|_| draw_mu(m[(0, j)], v, f64::INFINITY, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - m[(0, j)]).abs() < 0.01, "j={j}: {mean} vs {}", m[(0, j)]);
    }
}

#[test]
fn mu_update_shrinks_with_finite_hypervariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (m, v, s2) = (0.3, 0.01, 0.04);
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| draw_mu(m, v, s2, &mut rng)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
    assert!((mean - m * s2 / (s2 + v)).abs() < 0.002);
    assert!((var / (s2 * v / (s2 + v)) - 1.0).abs() < 0.03);
}

#[test]
fn sigma2_update_inverse_gamma_moment() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 100_000;
    let mean_prec = (0..n).map(|_| 1.0 / draw_sigma2(0.2, 0.0, 0.0, &mut rng)).sum::<f64>() / n as f64;
    assert!((mean_prec / 25.0 - 1.0).abs() < 0.05, "{mean_prec}");
}

#[test]
fn sigma2_update_at_zero_mean_is_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let s = draw_sigma2(0.0, 0.0, 0.0, &mut rng);
        assert!(s.is_finite() && s > 0.0);
    }
}

#[test]
fn signperm_identity_and_permutations() {
    let b = b0();
    assert!(signperm_accept(&b, &b).unwrap());
    for perm in [[1, 0, 2], [0, 2, 1], [2, 1, 0], [1, 2, 0], [2, 0, 1]] {
        let bp = &b * permutation_matrix(&perm);
        assert!(!signperm_accept(&bp, &b).unwrap(), "{perm:?}");
    }
}

#[test]
fn signperm_small_perturbations_accepted() {
    let b = b0();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut accepted = 0;
    for _ in 0..1000 {
        let e = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let bp = &b * (DMatrix::identity(3, 3) + e * 0.05);
        if signperm_accept(&bp, &b).unwrap() {
            accepted += 1;
        }
    }
    assert_eq!(accepted, 1000);
}

#[test]
fn signperm_singular_reference() {
    let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
    assert!(matches!(
        signperm_accept(&DMatrix::identity(2, 2), &singular),
        Err(Error::SingularMatrix { .. })
    ));
}

#[test]
fn align_recovers_signed_permutation() {
    let b = b0();
    let mixed = &b * permutation_matrix(&[2, 0, 1]) * DMatrix::from_diagonal(&nalgebra::dvector![-1.0, 1.0, -1.0]);
    let l = align_to_reference(&mixed, &b).unwrap().unwrap();
    let back = l.apply_columns(&mixed);
    assert!((back - &b).amax() < 1e-12);
}

#[test]
fn proxy_labeling_identity_when_aligned() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let t = 2000;
    let e = DMatrix::from_fn(t, 3, |_, _| normal(&mut rng));
    let z = DMatrix::from_fn(t, 1, |r, _| e[(r, 1)] + 0.1 * normal(&mut rng));
    let proxies = ProxySet::new(z, vec![1], 3).unwrap();
    let l = proxy_label_shocks(&e, &proxies).unwrap();
    assert_eq!(l.perm, vec![0, 1, 2]);
    assert_eq!(l.signs, vec![1.0, 1.0, 1.0]);
}

#[test]
fn proxy_labeling_finds_swapped_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let t = 2000;
    let e = DMatrix::from_fn(t, 3, |_, _| normal(&mut rng));
    let z = DMatrix::from_fn(t, 1, |r, _| e[(r, 2)] + 0.1 * normal(&mut rng));
    let proxies = ProxySet::new(z, vec![2], 3).unwrap();
    let swapped = &e * permutation_matrix(&[0, 2, 1]);
    let l = proxy_label_shocks(&swapped, &proxies).unwrap();
    assert_eq!(l.perm, vec![0, 2, 1]);
    assert_eq!(l.apply_columns(&swapped), e);
}

#[test]
fn proxy_labeling_max_absolute_with_sign_flip() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let t = 5000;
    let e = DMatrix::from_fn(t, 3, |_, _| normal(&mut rng));
    // Weights chosen so corr(z, e2) ≈ -0.6 and corr(z, e1) ≈ 0.3.
    let z = DMatrix::from_fn(t, 1, |r, _| -0.6 * e[(r, 2)] + 0.3 * e[(r, 1)] + 0.7416 * normal(&mut rng));
    let proxies = ProxySet::new(z, vec![0], 3).unwrap();
    let l = proxy_label_shocks(&e, &proxies).unwrap();
    assert_eq!(l.perm, vec![2, 0, 1]);
    assert_eq!(l.signs[0], -1.0);
}

#[test]
fn proxy_labeling_ties_go_to_lower_index() {
    let t = 4;
    let z = DMatrix::from_column_slice(t, 1, &[1.0, -1.0, 1.0, -1.0]);
    let e = DMatrix::from_fn(t, 2, |r, _| z[(r, 0)]);
    let proxies = ProxySet::new(z, vec![1], 2).unwrap();
    let l = proxy_label_shocks(&e, &proxies).unwrap();
    assert_eq!(l.perm, vec![1, 0]);
}

fn rotation2(angle: f64) -> DMatrix<f64> {
    let (c, s) = (angle.cos(), angle.sin());
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

fn recovery_setup() -> (TimeSeriesPanel, DMatrix<f64>) {
    let b = rotation2(0.5);
    let shocks = [SkewTParams::new(0.6, 4.0).unwrap(), SkewTParams::new(-0.3, 6.0).unwrap()];
    (skewt_panel(&b, &shocks, 10_000, 41), b)
}

#[test]
fn first_step_recovers_rotation() {
    let (panel, b) = recovery_setup();
    let t = panel.nobs();
    let fs = first_step_estimate(
        &panel,
        &DeterministicDesign::empty(t),
        &ProxySet::none(t),
        &static_spec(Variant::NonGaussian),
        &FirstStepOptions::default(),
    )
    .unwrap();
    assert!(fs.converged);
    assert!(!fs.flat);
    let l = align_to_reference(&fs.b, &b).unwrap().unwrap();
    let err = (l.apply_columns(&fs.b) - &b).amax();
    assert!(err < 0.05, "max error {err}\n{}", fs.b);
}

#[test]
fn first_step_restart_at_mode_is_stationary() {
    let (panel, _) = recovery_setup();
    let t = panel.nobs();
    let design = DeterministicDesign::empty(t);
    let proxies = ProxySet::none(t);
    let spec = static_spec(Variant::NonGaussian);
    let opts = FirstStepOptions::default();
    let fs = first_step_estimate(&panel, &design, &proxies, &spec, &opts).unwrap();
    let again =
        first_step_estimate_from(&panel, &design, &proxies, &spec, Some((fs.b.clone(), fs.shocks.clone())), &opts).unwrap();
    assert!(again.iterations <= 5, "{} iterations", again.iterations);
    assert!((again.b - fs.b).amax() < 1e-4);
}

#[test]
fn first_step_flags_flat_gaussian_surface() {
    let shocks = [SkewTParams::new(0.0, 200.0).unwrap(), SkewTParams::new(0.0, 200.0).unwrap()];
    let panel = skewt_panel(&rotation2(0.3), &shocks, 10_000, 42);
    let t = panel.nobs();
    let res = first_step_estimate(
        &panel,
        &DeterministicDesign::empty(t),
        &ProxySet::none(t),
        &static_spec(Variant::NonGaussian),
        &FirstStepOptions::default(),
    );
    let flat = match res {
        Ok(fs) => fs.flat,
        Err(e) => panic!("{e}"),
    };
    assert!(flat);
}

#[test]
fn first_step_rejects_gaussian_variant() {
    let (panel, _) = recovery_setup();
    let t = panel.nobs();
    let r = first_step_estimate(
        &panel,
        &DeterministicDesign::empty(t),
        &ProxySet::none(t),
        &static_spec(Variant::GaussianWeighting),
        &FirstStepOptions::default(),
    );
    assert!(matches!(r, Err(Error::InvalidInput(_))));
}

#[test]
fn adaptation_frozen_after_freeze() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let mut blk = RandomWalkBlock::new("x", &DMatrix::identity(2, 2));
    for _ in 0..300 {
        let x = [normal(&mut rng) * 3.0, normal(&mut rng)];
        blk.observe(&x);
        blk.record(rng.random::<f64>() < 0.9);
    }
    blk.end_window(0.25);
    blk.freeze();
    let (scale, chol) = (blk.scale(), blk.cholesky().clone());
    for _ in 0..500 {
        blk.observe(&[normal(&mut rng) * 10.0, 5.0]);
        blk.record(false);
    }
    blk.end_window(0.25);
    assert_eq!(blk.scale(), scale);
    assert_eq!(blk.cholesky(), &chol);
}

#[test]
fn adaptation_moves_scale_toward_target() {
    let mut blk = RandomWalkBlock::new("x", &DMatrix::identity(1, 1));
    for _ in 0..100 {
        blk.record(true);
    }
    blk.end_window(0.25);
    assert!(blk.scale() > 1.0);
    for _ in 0..100 {
        blk.record(false);
    }
    let before = blk.scale();
    blk.end_window(0.25);
    assert!(blk.scale() < before);
}

#[test]
fn chain_config_validation() {
    let mut cfg = ChainConfig {
        draws: 10,
        burn_in: 10,
        ..Default::default()
    };
    assert!(cfg.validate().is_err());
    cfg.draws = 11;
    assert!(cfg.validate().is_ok());
    cfg.target_accept = 1.0;
    assert!(cfg.validate().is_err());
}

#[test]
fn model_spec_validation() {
    let proxies = ProxySet::none(10);
    assert!(static_spec(Variant::GaussianWeighting).validate(3, &proxies).is_err());
    assert!(static_spec(Variant::GaussianAugmented).validate(3, &proxies).is_err());
    assert!(static_spec(Variant::NonGaussian).validate(1, &proxies).is_err());
    let mut spec = static_spec(Variant::GaussianWeighting);
    spec.zero_restrictions = vec![(0, 1)];
    assert!(spec.validate(2, &proxies).is_ok());
    spec.zero_restrictions = vec![(0, 2)];
    assert!(spec.validate(2, &proxies).is_err());
    let mut spec = static_spec(Variant::NonGaussian);
    spec.labeling = LabelingMode::ProxyCorrelation;
    assert!(spec.validate(3, &proxies).is_err());
}

fn toy_panel() -> TimeSeriesPanel {
    let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.8]);
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let eps = DMatrix::from_fn(200, 2, |_, _| normal(&mut rng));
    TimeSeriesPanel::from_values(&eps * b.transpose()).unwrap()
}

fn toy_spec() -> ModelSpec {
    let mut spec = static_spec(Variant::GaussianWeighting);
    spec.zero_restrictions = vec![(0, 1)];
    spec.labeling = LabelingMode::None;
    spec
}

// Marginal posterior of b10 in the lower-triangular Gaussian model on 50 bins,
// by brute-force integration over (b00, b11) on a grid.
fn toy_grid_marginal(panel: &TimeSeriesPanel, lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let u = panel.values();
    let t = u.nrows() as f64;
    let s = u.transpose() * u;
    let (s11, s12, s22) = (s[(0, 0)], s[(0, 1)], s[(1, 1)]);
    let l = (s.clone() / t).cholesky().unwrap().l();
    let grid = |c: f64, k: usize, i: usize| c * (0.6 + 0.8 * (i as f64 + 0.5) / k as f64);
    let (k00, k11, sub) = (160, 160, 8);
    let mut logp = Vec::with_capacity(bins * sub * k00 * k11);
    for bin in 0..bins {
        for si in 0..sub {
            let b10 = lo + (hi - lo) * (bin as f64 + (si as f64 + 0.5) / sub as f64) / bins as f64;
            for i in 0..k00 {
                let b00 = grid(l[(0, 0)], k00, i);
                for j in 0..k11 {
                    let b11 = grid(l[(1, 1)], k11, j);
                    let r = b10 / b00;
                    let q = s11 / (b00 * b00) + (s22 - 2.0 * r * s12 + r * r * s11) / (b11 * b11);
                    logp.push(-t * (b00 * b11).ln() - 0.5 * q);
                }
            }
        }
    }
    let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let per_bin = sub * k00 * k11;
    let mass: Vec<f64> = logp
        .chunks(per_bin)
        .map(|c| c.iter().map(|v| (v - max).exp()).sum())
        .collect();
    let total: f64 = mass.iter().sum();
    mass.iter().map(|m| m / total).collect()
}

#[test]
fn toy_posterior_matches_grid() {
    let panel = toy_panel();
    let t = panel.nobs();
    let cfg = ChainConfig {
        draws: 205_000,
        burn_in: 5_000,
        seed: 7,
        ..Default::default()
    };
    let out = run_chain(&panel, &DeterministicDesign::empty(t), &ProxySet::none(t), &toy_spec(), &cfg).unwrap();
    let u = panel.values();
    let l = (u.transpose() * u / t as f64).cholesky().unwrap().l();
    let (lo, hi, bins) = (l[(1, 0)] - 0.3, l[(1, 0)] + 0.3, 50);
    let grid = toy_grid_marginal(&panel, lo, hi, bins);
    let mut counts = vec![0.0; bins];
    for d in &out.draws {
        let x = d.b[(1, 0)];
        if x >= lo && x < hi {
            counts[((x - lo) / (hi - lo) * bins as f64) as usize] += 1.0;
        }
    }
    let total: f64 = counts.iter().sum();
    assert!(total > 0.99 * out.draws.len() as f64);
    let tv: f64 = 0.5 * counts.iter().zip(&grid).map(|(c, g)| (c / total - g).abs()).sum::<f64>();
    assert!(tv < 0.05, "total variation {tv}");
    for d in &out.draws {
        assert_eq!(d.b[(0, 1)], 0.0);
    }
}

#[test]
fn chains_with_equal_seeds_are_identical() {
    let sim = simulate(250, 0.0, 71);
    let cfg = ChainConfig {
        draws: 600,
        burn_in: 300,
        seed: 5,
        stream: 2,
        ..Default::default()
    };
    let spec = static_spec(Variant::NonGaussianWeighting);
    let a = run_chain(&sim.panel, &sim.design, &sim.proxies, &spec, &cfg).unwrap();
    let b = run_chain(&sim.panel, &sim.design, &sim.proxies, &spec, &cfg).unwrap();
    assert_eq!(a.draws, b.draws);
    let other = run_chain(&sim.panel, &sim.design, &sim.proxies, &spec, &ChainConfig { stream: 3, ..cfg }).unwrap();
    assert_ne!(a.draws, other.draws);
}

#[test]
fn chain_draws_are_finite_and_labeled() {
    let sim = simulate(250, -0.1, 72);
    let cfg = ChainConfig {
        draws: 1000,
        burn_in: 500,
        thin: 5,
        ..Default::default()
    };
    let out = run_chain(&sim.panel, &sim.design, &sim.proxies, &static_spec(Variant::NonGaussianWeighting), &cfg).unwrap();
    assert_eq!(out.draws.len(), 100);
    let reference = out.reference.clone().unwrap();
    for d in &out.draws {
        assert!(d.log_posterior.is_finite());
        assert!(d.b.determinant().abs() > 1e-12);
        assert!(signperm_accept(&d.b, &reference).unwrap());
        for (l, q) in d.lambda.iter().zip(&d.q) {
            assert!((-0.99..=0.99).contains(l) && (2.1..=100.0).contains(q));
        }
        assert!(d.exogeneity.sigma2().iter().all(|s| *s > 0.0));
    }
    for (name, rate) in &out.acceptance {
        assert!(*rate > 0.05 && *rate < 0.7, "{name}: {rate}");
    }
}

#[test]
fn proxy_correlation_labeling_holds_every_draw() {
    let sim = simulate(250, 0.0, 73);
    let mut spec = static_spec(Variant::NonGaussianWeighting);
    spec.labeling = LabelingMode::ProxyCorrelation;
    let cfg = ChainConfig {
        draws: 800,
        burn_in: 400,
        ..Default::default()
    };
    let out = run_chain(&sim.panel, &sim.design, &sim.proxies, &spec, &cfg).unwrap();
    for d in &out.draws {
        let e = sim.panel.values() * d.b.clone().try_inverse().unwrap().transpose();
        assert!(proxy_label_shocks(&e, &sim.proxies).unwrap().is_identity());
    }
}

#[test]
fn gaussian_variant_keeps_mu_at_zero() {
    let sim = simulate(250, 0.0, 74);
    let mut spec = static_spec(Variant::GaussianWeighting);
    spec.labeling = LabelingMode::Reference(b0());
    let cfg = ChainConfig {
        draws: 600,
        burn_in: 300,
        ..Default::default()
    };
    let out = run_chain(&sim.panel, &sim.design, &sim.proxies, &spec, &cfg).unwrap();
    for d in &out.draws {
        assert!(d.exogeneity.mu().iter().all(|m| *m == 0.0));
        assert!(d.lambda.is_empty());
    }
}

#[test]
fn nongaussian_weighting_recovers_tax_column() {
    let truth = [0.0, -0.5, 1.0];
    let reps = 4;
    let mut avg = [0.0; 3];
    for rep in 0..reps {
        let sim = simulate(800, 0.0, 100 + rep);
        let cfg = ChainConfig {
            seed: rep,
            ..Default::default()
        };
        let out = run_chain(&sim.panel, &sim.design, &sim.proxies, &static_spec(Variant::NonGaussianWeighting), &cfg).unwrap();
        for (i, a) in avg.iter_mut().enumerate() {
            *a += median(out.draws.iter().map(|d| d.b[(i, 2)]).collect()) / reps as f64;
        }
    }
    for i in 0..3 {
        assert!((avg[i] - truth[i]).abs() < 0.05, "entry {i}: {:?}", avg);
    }
}

#[test]
fn augmented_loading_recovered() {
    let sim = simulate(800, 0.0, 81);
    let mut spec = static_spec(Variant::GaussianAugmented);
    spec.labeling = LabelingMode::Reference(b0());
    let out = run_chain(&sim.panel, &sim.design, &sim.proxies, &spec, &ChainConfig::default()).unwrap();
    let phi = median(out.draws.iter().map(|d| d.block.loadings[0]).collect());
    assert!((phi - 0.5f64.sqrt()).abs() < 0.1, "{phi}");
}

#[test]
fn chain_rejects_misaligned_proxies() {
    let sim = simulate(100, 0.0, 82);
    let short = ProxySet::new(DMatrix::from_element(50, 1, 1.0), vec![2], 3);
    let proxies = match short {
        Ok(p) => p,
        Err(_) => ProxySet::new(DMatrix::from_fn(50, 1, |r, _| r as f64), vec![2], 3).unwrap(),
    };
    let r = run_chain(
        &sim.panel,
        &sim.design,
        &proxies,
        &static_spec(Variant::NonGaussianWeighting),
        &ChainConfig::default(),
    );
    assert!(matches!(r, Err(Error::DimensionMismatch(_))));
}
