//! Reproduction checks for the simulation tables, the property suites and
//! the fiscal application. Each check returns a [`Check`]; the `acceptance`
//! test target prints them.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ngproxy::fiscal::{
    load_dataset, map_to_mertens, run_fiscal, FiscalModel, FiscalOptions, FiscalRun, MertensParams, SchemaConfig,
    OUTPUT,
};
use ngproxy::likelihood::{gaussian_log_likelihood, proxy_moment_stats, reweight_log, ExogeneityMeans, ProxySet};
use ngproxy::proxy::{build_augmented, iv_impact_ratio, AugmentedConfig, DEFAULT_WEAK_GUARD};
use ngproxy::sampler::gibbs::{draw_mu, draw_sigma2};
use ngproxy::sampler::labeling::signperm_accept;
use ngproxy::sampler::{ChainConfig, Variant};
use ngproxy::shocks::{pearson_sample, PearsonMoments, SkewTParams};
use ngproxy::simlab::{run_scenario, Preset, Scenario, ScenarioOutcome};
use ngproxy::var::{impulse_responses, DeterministicDesign, ReducedFormVar, StructuralMatrix, TimeSeriesPanel, VarSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self { name: name.to_string(), pass, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Reference values the simulation criteria compare against.
pub mod targets {
    pub const GW_MEAN_EXO_250: [f64; 3] = [0.00, -0.50, 1.00];
    pub const GW_MSE_EXO_250: [f64; 3] = [0.008, 0.009, 0.022];
    pub const GAUSSIAN_THIRD_ENDO_800: f64 = 0.41;
    pub const NGW_THIRD_ENDO_800: f64 = 0.96;
    pub const NGW_COVERAGE_EXO: f64 = 0.68;
}

/// Entries of the target column that the contaminating shock can bias.
pub const CONTAMINATED: [usize; 2] = [1, 2];

pub fn fmt3(v: &[f64]) -> String {
    format!("({})", v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", "))
}

/// Desk-scale run of one preset: 100 replications, 4000 draws of which 2000
/// burn-in, all four estimators.
pub fn desk_scale(preset: Preset, t: usize) -> ngproxy::Result<ScenarioOutcome> {
    let scenario = Scenario::preset(preset, t);
    run_scenario(&scenario, &ChainConfig::default())
}

fn row<'a>(o: &'a ScenarioOutcome, v: Variant) -> &'a ngproxy::simlab::MetricsRow {
    o.table.row(v).expect("scenario runs every estimator")
}

pub fn point_estimates(exo250: &ScenarioOutcome) -> Check {
    let gw = row(exo250, Variant::GaussianWeighting);
    let mean_ok = gw.mean.iter().zip(targets::GW_MEAN_EXO_250).all(|(m, p)| (m - p).abs() <= 0.05);
    let mse_ok = gw.mse.iter().zip(targets::GW_MSE_EXO_250).all(|(m, p)| *m <= 2.0 * p && *m >= 0.5 * p);
    Check::new(
        "Point estimates (exogenous, T=250)",
        mean_ok && mse_ok,
        format!(
            "GW mean {} vs {} (±0.05); MSE {} vs {} (factor 2)",
            fmt3(&gw.mean),
            fmt3(&targets::GW_MEAN_EXO_250),
            fmt3(&gw.mse),
            fmt3(&targets::GW_MSE_EXO_250)
        ),
    )
}

pub fn bias_pattern(endo800: &ScenarioOutcome) -> Check {
    let ga = row(endo800, Variant::GaussianAugmented).mean[2];
    let gw = row(endo800, Variant::GaussianWeighting).mean[2];
    let ngw = row(endo800, Variant::NonGaussianWeighting).mean[2];
    let gaussian_ok = [ga, gw]
        .iter()
        .all(|v| *v <= 0.55 && (v - targets::GAUSSIAN_THIRD_ENDO_800).abs() <= 0.10);
    let ngw_ok = ngw >= 0.85 && (ngw - targets::NGW_THIRD_ENDO_800).abs() <= 0.10;
    let order_ok = ngw > ga && ngw > gw;
    Check::new(
        "Bias pattern (endogenous, T=800)",
        gaussian_ok && ngw_ok && order_ok,
        format!("third entry GA {ga:.3}, GW {gw:.3} (≤ 0.55, 0.41±0.10); NGW {ngw:.3} (≥ 0.85, 0.96±0.10)"),
    )
}

pub fn coverage_pattern(endo250: &ScenarioOutcome, exo250: &ScenarioOutcome) -> Check {
    let gw = &row(endo250, Variant::GaussianWeighting).coverage;
    let ngw = &row(endo250, Variant::NonGaussianWeighting).coverage;
    let exo = &row(exo250, Variant::NonGaussianWeighting).coverage;
    let gw_ok = CONTAMINATED.iter().all(|&i| gw[i] <= 0.15);
    let ngw_ok = CONTAMINATED.iter().all(|&i| ngw[i] >= 0.40);
    let exo_ok = exo.iter().all(|c| (c - targets::NGW_COVERAGE_EXO).abs() <= 0.08);
    Check::new(
        "Coverage pattern",
        gw_ok && ngw_ok && exo_ok,
        format!(
            "endogenous T=250 GW {} (contaminated ≤ 0.15: {}), NGW {} (contaminated ≥ 0.40: {}); exogenous NGW {} (0.68±0.08: {})",
            fmt3(gw),
            ok(gw_ok),
            fmt3(ngw),
            ok(ngw_ok),
            fmt3(exo),
            ok(exo_ok)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "missed"
    }
}

pub fn efficiency_gain(exo250: &ScenarioOutcome) -> Check {
    let ngw = &row(exo250, Variant::NonGaussianWeighting).band_length;
    let ng = &row(exo250, Variant::NonGaussian).band_length;
    let ratios: Vec<f64> = CONTAMINATED.iter().map(|&i| ngw[i] / ng[i]).collect();
    Check::new(
        "Efficiency gain (exogenous, T=250)",
        ratios.iter().all(|r| *r <= 0.75),
        format!(
            "band length NGW {} vs NG {}; contaminable-entry ratios {} (≤ 0.75)",
            fmt3(ngw),
            fmt3(ng),
            fmt3(&ratios)
        ),
    )
}

// ---------------------------------------------------------------------------
// Property suites

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, rng)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

fn dgp() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.15, 1.0, -0.5, 0.0, 1.5, 1.0])
}

/// `∫ f(x) dx` over the real line via `x = s/(1−s²)` and composite Simpson.
fn integrate_line(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
    let h = 2.0 / panels as f64;
    let g = |s: f64| {
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - s * s;
        f(s / d) * (1.0 + s * s) / (d * d)
    };
    let mut acc = g(-1.0) + g(1.0);
    for i in 1..panels {
        let s = -1.0 + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(s);
    }
    acc * h / 3.0
}

pub fn skewt_quadrature() -> Check {
    let mut worst: f64 = 0.0;
    for lambda in [-0.7, 0.0, 0.4, 0.9] {
        for q in [2.5, 5.0, 20.0] {
            let p = SkewTParams::new(lambda, q).expect("valid");
            let pdf = |x: f64| p.ln_pdf(x).exp();
            let mass = integrate_line(pdf, 400_000);
            let mean = integrate_line(|x| x * pdf(x), 400_000);
            let var = integrate_line(|x| x * x * pdf(x), 400_000) - mean * mean;
            worst = worst.max((mass - 1.0).abs()).max(mean.abs()).max((var - 1.0).abs());
        }
    }
    Check::new(
        "skew-t normalization, mean and variance by quadrature",
        worst <= 1e-5,
        format!("max deviation {worst:.2e} over 12 (λ, q) pairs (≤ 1e-5)"),
    )
}

pub fn gaussian_rotation_invariance() -> Check {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut seed = 0;
    while cases < 100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        seed += 1;
        let u = gaussian_matrix(&mut rng, 80, 3);
        let b = gaussian_matrix(&mut rng, 3, 3) * 0.4 + DMatrix::identity(3, 3);
        // The tolerance is absolute, so B is kept well conditioned: near
        // singular draws put the log likelihood near 1e7 where rounding alone
        // exceeds 1e-8.
        let sv = b.singular_values();
        if sv.max() / sv.min() > 50.0 {
            continue;
        }
        cases += 1;
        let panel = TimeSeriesPanel::from_values(u).expect("finite");
        let design = DeterministicDesign::empty(80);
        let var = ReducedFormVar::zero(3, VarSpec::new(0, false), 0);
        let l1 = gaussian_log_likelihood(&panel, &design, &var, &StructuralMatrix::new(b.clone()).expect("invertible"))
            .expect("finite");
        for _ in 0..10 {
            let q = gaussian_matrix(&mut rng, 3, 3).qr().q();
            let l2 = gaussian_log_likelihood(&panel, &design, &var, &StructuralMatrix::new(&b * q).expect("invertible"))
                .expect("finite");
            worst = worst.max((l1 - l2).abs());
        }
    }
    Check::new(
        "Gaussian likelihood rotation invariance",
        worst <= 1e-8,
        format!("max |ΔlogL| {worst:.2e} over 100 impact matrices × 10 rotations (≤ 1e-8)"),
    )
}

pub fn reweight_argmax() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let t = 300;
    let e = gaussian_matrix(&mut rng, t, 3);
    let z = gaussian_matrix(&mut rng, t, 2);
    let variance = [1.3, 0.7];
    let proxies = ProxySet::with_variance(z, vec![0, 2], variance.to_vec(), 3).expect("valid proxies");
    let m = proxy_moment_stats(&proxies, &e).expect("aligned");
    let at = |mu: &DMatrix<f64>| {
        let means = ExogeneityMeans::new(mu.clone(), DMatrix::from_element(2, 3, 1.0), &proxies).expect("valid");
        reweight_log(&proxies, &e, &means).expect("aligned")
    };
    // At μ = m every quadratic term vanishes and only the normalizing
    // constants −½ ln(2π v_k / T) remain, two per proxy.
    let peak: f64 = variance
        .iter()
        .map(|v| -(2.0 * std::f64::consts::PI * v / t as f64).ln())
        .sum();
    let at_m = at(&m);
    let mut below = true;
    for (k, j) in [(0, 1), (0, 2), (1, 0), (1, 1)] {
        for d in [1e-4, -1e-4, 0.05, -0.3] {
            let mut mu = m.clone();
            mu[(k, j)] += d;
            below &= at(&mu) < at_m;
        }
    }
    let gap = (at_m - peak).abs();
    Check::new(
        "reweighting maximum at μ = m",
        gap <= 1e-12 * peak.abs() && below,
        format!("value at m minus closed-form maximum {gap:.1e}; every perturbed μ lower: {below}"),
    )
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n)
}

pub fn conjugate_updates() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let n = 100_000;
    let mut rel: Vec<(String, f64)> = Vec::new();
    // μ | σ², m: Normal prior N(0, σ²) times Normal likelihood N(m, v).
    for &(m, v, s2) in &[(0.3, 0.01, 0.04), (-0.12, 0.004, 0.5), (0.05, 0.02, f64::INFINITY)] {
        let draws: Vec<f64> = (0..n).map(|_| draw_mu(m, v, s2, &mut rng)).collect();
        let (mean, var) = mean_var(&draws);
        let (pm, pv) = if s2.is_infinite() {
            (m, v)
        } else {
            (m * s2 / (s2 + v), 1.0 / (1.0 / s2 + 1.0 / v))
        };
        rel.push((format!("mu mean m={m}"), (mean / pm - 1.0).abs()));
        rel.push((format!("mu var m={m}"), (var / pv - 1.0).abs()));
    }
    // σ² | μ ~ IG(a + ½, b + μ²/2): the precision is Gamma(a + ½, rate b + μ²/2).
    for &(mu, a, b) in &[(0.2, 0.0, 0.0), (0.2, 3.0, 0.5), (1.1, 1.0, 0.1)] {
        let prec: Vec<f64> = (0..n).map(|_| 1.0 / draw_sigma2(mu, a, b, &mut rng)).collect();
        let (mean, var) = mean_var(&prec);
        let shape = a + 0.5;
        let rate = b + 0.5 * mu * mu;
        rel.push((format!("precision mean mu={mu} a={a}"), (mean / (shape / rate) - 1.0).abs()));
        rel.push((format!("precision var mu={mu} a={a}"), (var / (shape / (rate * rate)) - 1.0).abs()));
    }
    let worst = rel.iter().cloned().fold((String::new(), 0.0), |acc, r| if r.1 > acc.1 { r } else { acc });
    Check::new(
        "conjugate μ and σ² updates",
        worst.1 <= 0.05,
        format!("largest relative moment error {:.3} ({}) over 12 moments (≤ 0.05)", worst.1, worst.0),
    )
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn signperm_truth_table() -> Check {
    let b = dgp();
    let mut mismatches = 0;
    let mut cases = 0;
    for perm in permutations(3) {
        for signs in 0..8u32 {
            let p = DMatrix::from_fn(3, 3, |r, c| {
                if perm[c] == r {
                    if signs >> c & 1 == 1 {
                        -1.0
                    } else {
                        1.0
                    }
                } else {
                    0.0
                }
            });
            let identity = perm.iter().enumerate().all(|(i, &p)| i == p);
            let accepted = signperm_accept(&(&b * p), &b).expect("invertible reference");
            cases += 1;
            if accepted != identity {
                mismatches += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let mut perturbed = 0;
    for _ in 0..1000 {
        let e = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        if signperm_accept(&(&b * (DMatrix::identity(3, 3) + e * 0.05)), &b).expect("invertible") {
            perturbed += 1;
        }
    }
    Check::new(
        "sign-permutation acceptance truth table",
        mismatches == 0 && perturbed == 1000,
        format!("{mismatches} mismatches in {cases} signed permutations; {perturbed}/1000 small perturbations accepted"),
    )
}

pub fn mertens_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..1000 {
        let p = MertensParams {
            theta_g: rng.random_range(-0.5..0.5),
            theta_y: rng.random_range(-1.0..3.0),
            sigma_tau: rng.random_range(0.5..2.0),
            gamma_tau: rng.random_range(-0.3..0.3),
            gamma_y: rng.random_range(-0.3..0.3),
            sigma_g: rng.random_range(0.5..2.0),
            eta_tau: rng.random_range(-0.3..0.3),
            eta_g: rng.random_range(-0.3..0.5),
            sigma_y: rng.random_range(0.5..2.0),
        };
        match p.reconstruct().and_then(|b| map_to_mertens(&b)) {
            Ok(back) => {
                for (x, y) in p.to_array().iter().zip(back.to_array()) {
                    worst = worst.max((x - y).abs());
                }
            }
            Err(_) => failures += 1,
        }
    }
    Check::new(
        "simultaneous-equation mapping round trip",
        worst <= 1e-10 && failures == 0,
        format!("max error {worst:.1e} over 1000 parameter sets, {failures} failures (≤ 1e-10)"),
    )
}

pub fn irf_simulation_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let n = 3;
    let horizon = 24;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let a: Vec<DMatrix<f64>> = (0..3).map(|_| gaussian_matrix(&mut rng, n, n) * 0.15).collect();
        let var = ReducedFormVar::new(Some(DVector::zeros(n)), a.clone(), DMatrix::zeros(n, 0)).expect("valid");
        let b = StructuralMatrix::new(gaussian_matrix(&mut rng, n, n) * 0.3 + DMatrix::identity(n, n)).expect("invertible");
        let irf = impulse_responses(&var, &b, horizon);
        for shock in 0..n {
            // Propagate y_t = Σ A_i y_{t−i} from y_0 = B e_shock.
            let mut path: Vec<DVector<f64>> = Vec::new();
            for h in 0..=horizon {
                let mut y = if h == 0 {
                    b.matrix().column(shock).into_owned()
                } else {
                    DVector::zeros(n)
                };
                for (i, ai) in a.iter().enumerate() {
                    if h > i {
                        y += ai * &path[h - 1 - i];
                    }
                }
                worst = (0..n).fold(worst, |w, r| w.max((irf[h][(r, shock)] - y[r]).abs()));
                path.push(y);
            }
        }
    }
    Check::new(
        "impulse responses against a simulation oracle",
        worst <= 1e-10,
        format!("max |difference| {worst:.1e} over 20 VAR(3) systems, 25 horizons (≤ 1e-10)"),
    )
}

pub fn iv_ratio_consistency() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let t = 1_000_000;
    let moments = PearsonMoments::new(0.68, 2.33).expect("feasible");
    let eps = DMatrix::from_column_slice(t, 3, &pearson_sample(moments, &mut rng, 3 * t).expect("sample"));
    let noise = pearson_sample(moments, &mut rng, t).expect("sample");
    let u = &eps * dgp().transpose();
    let z: Vec<f64> = (0..t).map(|r| eps[(r, 2)] + noise[r]).collect();
    let r = iv_impact_ratio(&z, &u, 2, DEFAULT_WEAK_GUARD).expect("relevant proxy");
    // Column of ε_τ relative to its own-variable entry: (0, −0.5, 1)/1.
    let err = [r[0].abs(), (r[1] + 0.5).abs(), (r[2] - 1.0).abs()];
    Check::new(
        "IV ratio consistency at T = 10^6",
        err.iter().all(|e| *e <= 0.01),
        format!("ratio {} vs (0, −0.5, 1) (±0.01)", fmt3(r.as_slice())),
    )
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64;
    cov / (va * vb).sqrt()
}

/// A Bernoulli-censored proxy `z = ψ(ε + 0.2η)` fitted through the augmented
/// measurement equation leaves residuals whose size tracks |ε|.
pub fn censored_proxy_dependence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let t = 10_000;
    let mut eps = Vec::with_capacity(t);
    let mut z = Vec::with_capacity(t);
    for _ in 0..t {
        let e = normal(&mut rng);
        let eta = normal(&mut rng);
        let psi = if rng.random::<f64>() < 0.3 { 1.0 } else { 0.0 };
        eps.push(e);
        z.push(psi * (e + 0.2 * eta));
    }
    let proxies = ProxySet::with_variance(DMatrix::from_column_slice(t, 1, &z), vec![0], vec![1.0], 1).expect("valid");
    let system = build_augmented(1, &DMatrix::zeros(t, 0), &proxies, AugmentedConfig::simplified()).expect("valid");
    let zt = system.proxy_residuals().column(0);
    let phi = zt.iter().zip(&eps).map(|(a, b)| a * b).sum::<f64>() / eps.iter().map(|v| v * v).sum::<f64>();
    let eta_hat: Vec<f64> = zt.iter().zip(&eps).map(|(a, b)| (a - phi * b).abs()).collect();
    let abs_eps: Vec<f64> = eps.iter().map(|v| v.abs()).collect();
    let c = corr(&eta_hat, &abs_eps);
    Check::new(
        "censored proxy breaks independent measurement error",
        c > 0.1,
        format!("corr(|η̂|, |ε|) = {c:.3} with loading {phi:.3} (> 0.1)"),
    )
}

/// Every property check, in the order they are listed.
pub fn property_checks() -> Vec<Check> {
    vec![
        skewt_quadrature(),
        gaussian_rotation_invariance(),
        reweight_argmax(),
        conjugate_updates(),
        signperm_truth_table(),
        mertens_round_trip(),
        irf_simulation_oracle(),
        iv_ratio_consistency(),
        censored_proxy_dependence(),
    ]
}

pub fn property_suites(parts: &[Check]) -> Check {
    let failed: Vec<&str> = parts.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    Check::new(
        "Property suites",
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} of {} checks pass", parts.len(), parts.len())
        } else {
            format!("failing: {}", failed.join("; "))
        },
    )
}

// ---------------------------------------------------------------------------
// Fiscal application

/// Location of the fiscal dataset: `NGPROXY_FISCAL_DATA`, else `data/fiscal.csv`
/// at the workspace root. `None` when neither exists.
pub fn fiscal_data_path(workspace: &Path) -> Option<std::path::PathBuf> {
    let candidate = std::env::var_os("NGPROXY_FISCAL_DATA")
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| workspace.join("data/fiscal.csv"));
    candidate.is_file().then_some(candidate)
}

fn baseline(run: &FiscalRun) -> Option<&ngproxy::fiscal::ModelRun> {
    run.runs.iter().find(|r| r.model == FiscalModel::ProxyWeighting)
}

/// Criteria on the real data.
pub fn empirical_results(path: &Path) -> Check {
    let name = "Empirical results";
    let run = load_dataset(path, &SchemaConfig::default()).and_then(|d| run_fiscal(&d, &FiscalOptions::default()));
    let run = match run {
        Ok(r) => r,
        Err(e) => return Check::new(name, false, format!("pipeline error on {}: {e}", path.display())),
    };
    let base = baseline(&run).expect("baseline requested");
    let m = &base.multipliers;
    let prob = m.prob_spend_above_tax_at_impact;
    let tax_k = base.proxy_names.iter().position(|n| n == "tax_proxy").expect("baseline uses the tax proxy");
    let below = base.exogeneity.prob_below_zero(tax_k, OUTPUT);
    let (_, tax_peak) = m.tax.peak();
    let (_, spend_peak) = m.spend.peak();
    let pass = prob > 0.68
        && below >= 0.80
        && (0.4..=1.1).contains(&tax_peak)
        && (0.9..=1.5).contains(&spend_peak);
    Check::new(
        name,
        pass,
        format!(
            "P(spend > tax at impact) {prob:.3} (> 0.68); P(corr(tax proxy, ε_y) < 0) {below:.3} (≥ 0.80); \
             peak tax {tax_peak:.3} ∈ [0.4, 1.1]; peak spending {spend_peak:.3} ∈ [0.9, 1.5]"
        ),
    )
}

/// Without the dataset: the full pipeline on the synthetic fixture.
pub fn empirical_smoke(fixture: &Path) -> Check {
    let name = "Empirical results";
    let run = load_dataset(fixture, &SchemaConfig::default()).and_then(|d| run_fiscal(&d, &FiscalOptions::default()));
    let run = match run {
        Ok(r) => r,
        Err(e) => return Check::new(name, false, format!("fixture pipeline error: {e}")),
    };
    let labels: Vec<&str> = run.runs.iter().map(|r| r.label.as_str()).collect();
    let finite = run.runs.iter().all(|r| {
        let m = &r.multipliers;
        m.tax.median.iter().chain(&m.spend.median).all(|v| v.is_finite()) && m.used > 0
    });
    let csv_ok = [
        run.summary_csv(),
        run.irf_csv(),
        run.multipliers_csv(),
        run.exogeneity_csv(),
        run.new_proxies_csv(),
        run.median_shocks_csv().unwrap_or_default(),
    ]
    .iter()
    .all(|s| s.lines().count() > 1);
    Check::new(
        name,
        labels.len() == 5 && finite && csv_ok && run.new_proxies.is_some(),
        format!(
            "dataset not supplied; smoke run on the synthetic fixture: models [{}], finite multipliers {finite}, all exports non-empty {csv_ok}",
            labels.join(", ")
        ),
    )
}
