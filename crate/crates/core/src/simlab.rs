//! Monte Carlo laboratory: simulated SVAR data with a tax proxy, estimator
//! comparison over replications and the metric tables.
//!
//! Seeds: replication `r` of a scenario draws its data from
//! `ChaCha8Rng::seed_from_u64(master)` on stream `r << 8`; the chain for the
//! `i`-th estimator uses the same master seed on stream `(r << 8) | (i + 1)`.
//! Shock draws therefore depend only on the master seed and the replication,
//! not on the proxy rule.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::likelihood::ProxySet;
use crate::sampler::{run_chain, ChainConfig, LabelingMode, ModelSpec, Variant};
use crate::shocks::{PearsonDistribution, PearsonMoments};
use crate::stats::quantile;
use crate::var::{DeterministicDesign, TimeSeriesPanel, VarSpec};

/// `z = coef_target ε_target + contamination ε_contaminating + noise η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyRule {
    pub target: usize,
    pub coef_target: f64,
    pub contaminating: usize,
    pub contamination: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Exogenous,
    /// Contamination −0.10, as in the metric tables.
    Weak,
    /// Contamination −0.05, as in the proxy-process table.
    WeakAlt,
    Endogenous,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Exogenous, Preset::Weak, Preset::WeakAlt, Preset::Endogenous];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Exogenous => "exogenous",
            Preset::Weak => "weak",
            Preset::WeakAlt => "weak-alt",
            Preset::Endogenous => "endogenous",
        }
    }

    pub fn contamination(self) -> f64 {
        match self {
            Preset::Exogenous => 0.0,
            Preset::Weak => -0.10,
            Preset::WeakAlt => -0.05,
            Preset::Endogenous => -0.37,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown preset `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub b0: DMatrix<f64>,
    pub moments: PearsonMoments,
    pub t: usize,
    /// Lag order of the estimated VAR (the DGP itself has no dynamics).
    pub lags: usize,
    pub proxy: ProxyRule,
    pub replications: usize,
    pub estimators: Vec<Variant>,
    pub seed: u64,
    pub augmented: crate::proxy::AugmentedConfig,
    pub freeze_hyper_variance: bool,
}

/// Impact matrix of the simulation design, shocks ordered (g, y, τ).
pub fn dgp_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.15, 1.0, -0.5, 0.0, 1.5, 1.0])
}

impl Scenario {
    pub fn preset(preset: Preset, t: usize) -> Self {
        Self {
            name: preset.name().to_string(),
            b0: dgp_matrix(),
            moments: PearsonMoments::new(0.68, 2.33).expect("valid moments"),
            t,
            lags: 0,
            proxy: ProxyRule {
                target: 2,
                coef_target: 1.0,
                contaminating: 1,
                contamination: preset.contamination(),
                noise: 1.0,
            },
            replications: 100,
            estimators: vec![
                Variant::GaussianAugmented,
                Variant::GaussianWeighting,
                Variant::NonGaussian,
                Variant::NonGaussianWeighting,
            ],
            seed: 0,
            augmented: crate::proxy::AugmentedConfig::general(),
            freeze_hyper_variance: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.b0.nrows();
        if self.b0.shape() != (n, n) || n == 0 {
            return Err(Error::InvalidInput("B0 must be square".into()));
        }
        if !(self.b0.determinant().abs() > crate::var::SINGULAR_DET_TOL) {
            return Err(Error::SingularMatrix { det: self.b0.determinant() });
        }
        let p = self.proxy;
        if p.target >= n || p.contaminating >= n {
            return Err(Error::InvalidInput("proxy rule refers to a shock outside B0".into()));
        }
        if self.t <= n * self.lags + 1 {
            return Err(Error::InsufficientSample {
                observations: self.t,
                regressors: n * self.lags + 1,
            });
        }
        if self.replications == 0 || self.estimators.is_empty() {
            return Err(Error::InvalidInput("need at least one replication and one estimator".into()));
        }
        Ok(())
    }

    pub fn truth(&self) -> Vec<f64> {
        self.b0.column(self.proxy.target).iter().copied().collect()
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub panel: TimeSeriesPanel,
    pub design: DeterministicDesign,
    pub proxies: ProxySet,
    pub shocks: DMatrix<f64>,
    /// Proxy before standardization.
    pub raw_proxy: DVector<f64>,
}

/// Simulates `u = B0 ε` with Pearson shocks and the scenario's proxy. The
/// proxy is standardized to mean zero and unit variance.
pub fn generate_dataset(scenario: &Scenario, replication: usize) -> Result<SimulatedData> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream((replication as u64) << 8);
    let n = scenario.b0.nrows();
    let t = scenario.t + scenario.lags;
    let dist = PearsonDistribution::from_moments(scenario.moments)?;
    let mut eps = DMatrix::zeros(t, n);
    for j in 0..n {
        eps.set_column(j, &DVector::from_vec(dist.sample(&mut rng, t)));
    }
    let eta = dist.sample(&mut rng, t);
    let p = scenario.proxy;
    let raw = DVector::from_fn(t, |r, _| {
        p.coef_target * eps[(r, p.target)] + p.contamination * eps[(r, p.contaminating)] + p.noise * eta[r]
    });
    let u = &eps * scenario.b0.transpose();
    let labels = (0..n).map(|i| format!("u{i}")).collect();
    let panel = TimeSeriesPanel::with_leading_presample(&u, labels, scenario.lags)?;
    let keep = scenario.t;
    let raw = raw.rows(scenario.lags, keep).into_owned();
    let proxies = ProxySet::standardized(DMatrix::from_column_slice(keep, 1, raw.as_slice()), vec![p.target], n)?;
    Ok(SimulatedData {
        panel,
        design: DeterministicDesign::empty(keep),
        proxies,
        shocks: eps.rows(scenario.lags, keep).into_owned(),
        raw_proxy: raw,
    })
}

/// Posterior summary of the target column in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationEstimate {
    pub replication: usize,
    pub variant: Variant,
    pub median: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub variant: Variant,
    pub mean: Vec<f64>,
    pub mse: Vec<f64>,
    pub coverage: Vec<f64>,
    pub band_length: Vec<f64>,
    pub completed: usize,
    pub failed: usize,
    /// More than 2% of replications failed.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub scenario: String,
    pub t: usize,
    pub truth: Vec<f64>,
    pub rows: Vec<MetricsRow>,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub table: MetricsTable,
    pub estimates: Vec<ReplicationEstimate>,
    pub failures: Vec<(usize, Variant, String)>,
}

pub const BAND: (f64, f64) = (0.16, 0.84);

fn spec_for(scenario: &Scenario, variant: Variant) -> ModelSpec {
    let mut spec = ModelSpec::new(variant, VarSpec::new(scenario.lags, scenario.lags > 0));
    spec.labeling = LabelingMode::Reference(scenario.b0.clone());
    spec.augmented = scenario.augmented;
    spec.freeze_hyper_variance = scenario.freeze_hyper_variance;
    spec
}

/// Runs one replication for every estimator of the scenario.
pub fn run_replication(
    scenario: &Scenario,
    cfg: &ChainConfig,
    replication: usize,
) -> Vec<std::result::Result<ReplicationEstimate, (Variant, String)>> {
    let data = match generate_dataset(scenario, replication) {
        Ok(d) => d,
        Err(e) => return scenario.estimators.iter().map(|&v| Err((v, e.to_string()))).collect(),
    };
    let col = scenario.proxy.target;
    scenario
        .estimators
        .iter()
        .enumerate()
        .map(|(i, &variant)| {
            let chain_cfg = ChainConfig {
                seed: scenario.seed,
                stream: ((replication as u64) << 8) | (i as u64 + 1),
                ..cfg.clone()
            };
            let out = run_chain(&data.panel, &data.design, &data.proxies, &spec_for(scenario, variant), &chain_cfg)
                .map_err(|e| (variant, e.to_string()))?;
            let n = data.panel.nvars();
            let mut est = ReplicationEstimate {
                replication,
                variant,
                median: Vec::with_capacity(n),
                lower: Vec::with_capacity(n),
                upper: Vec::with_capacity(n),
            };
            for r in 0..n {
                let v: Vec<f64> = out.draws.iter().map(|d| d.b[(r, col)]).collect();
                est.median.push(quantile(&v, 0.5));
                est.lower.push(quantile(&v, BAND.0));
                est.upper.push(quantile(&v, BAND.1));
            }
            Ok(est)
        })
        .collect()
}

/// Runs every replication (in parallel) and aggregates the metrics.
pub fn run_scenario(scenario: &Scenario, cfg: &ChainConfig) -> Result<ScenarioOutcome> {
    scenario.validate()?;
    cfg.validate()?;
    let per_rep: Vec<_> = (0..scenario.replications)
        .into_par_iter()
        .map(|r| (r, run_replication(scenario, cfg, r)))
        .collect();
    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    for (r, results) in per_rep {
        for res in results {
            match res {
                Ok(e) => estimates.push(e),
                Err((v, msg)) => {
                    log::warn!("replication {r}, {v}: {msg}");
                    failures.push((r, v, msg));
                }
            }
        }
    }
    let table = aggregate(scenario, &estimates, &failures);
    Ok(ScenarioOutcome {
        table,
        estimates,
        failures,
    })
}

fn aggregate(scenario: &Scenario, estimates: &[ReplicationEstimate], failures: &[(usize, Variant, String)]) -> MetricsTable {
    let truth = scenario.truth();
    let rows = scenario
        .estimators
        .iter()
        .map(|&variant| {
            let mine: Vec<&ReplicationEstimate> = estimates.iter().filter(|e| e.variant == variant).collect();
            let failed = failures.iter().filter(|f| f.1 == variant).count();
            let mut row = metrics_row(variant, &mine, &truth);
            row.failed = failed;
            row.flagged = failed as f64 > 0.02 * scenario.replications as f64;
            row
        })
        .collect();
    MetricsTable {
        scenario: scenario.name.clone(),
        t: scenario.t,
        truth,
        rows,
    }
}

/// Coverage, band length and point metrics of one estimator.
pub fn metrics_row(variant: Variant, estimates: &[&ReplicationEstimate], truth: &[f64]) -> MetricsRow {
    let n = truth.len();
    let count = estimates.len().max(1) as f64;
    let mut row = MetricsRow {
        variant,
        mean: vec![0.0; n],
        mse: vec![0.0; n],
        coverage: vec![0.0; n],
        band_length: vec![0.0; n],
        completed: estimates.len(),
        failed: 0,
        flagged: false,
    };
    if estimates.is_empty() {
        for v in row.mean.iter_mut().chain(row.mse.iter_mut()).chain(row.coverage.iter_mut()).chain(row.band_length.iter_mut()) {
            *v = f64::NAN;
        }
        return row;
    }
    for e in estimates {
        for i in 0..n {
            row.mean[i] += e.median[i] / count;
            row.mse[i] += (e.median[i] - truth[i]).powi(2) / count;
            if e.lower[i] <= truth[i] && truth[i] <= e.upper[i] {
                row.coverage[i] += 1.0 / count;
            }
            row.band_length[i] += (e.upper[i] - e.lower[i]) / count;
        }
    }
    row
}

/// Coverage rows from per-replication estimates.
pub fn coverage_report(estimates: &[ReplicationEstimate], truth: &[f64]) -> Vec<MetricsRow> {
    let mut variants: Vec<Variant> = Vec::new();
    for e in estimates {
        if !variants.contains(&e.variant) {
            variants.push(e.variant);
        }
    }
    variants
        .into_iter()
        .map(|v| {
            let mine: Vec<&ReplicationEstimate> = estimates.iter().filter(|e| e.variant == v).collect();
            metrics_row(v, &mine, truth)
        })
        .collect()
}

fn fmt_entries(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",")
}

impl MetricsTable {
    /// Point estimates and MSE, one row per estimator.
    pub fn point_csv(&self) -> String {
        let n = self.truth.len();
        let mut out = String::from("scenario,T,estimator");
        for i in 0..n {
            write!(out, ",mean_{i}").unwrap();
        }
        for i in 0..n {
            write!(out, ",mse_{i}").unwrap();
        }
        out.push_str(",completed,failed,flagged\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.scenario,
                self.t,
                r.variant,
                fmt_entries(&r.mean),
                fmt_entries(&r.mse),
                r.completed,
                r.failed,
                r.flagged
            )
            .unwrap();
        }
        out
    }

    /// Coverage and average band length, one row per estimator.
    pub fn coverage_csv(&self) -> String {
        let n = self.truth.len();
        let mut out = String::from("scenario,T,estimator");
        for i in 0..n {
            write!(out, ",coverage_{i}").unwrap();
        }
        for i in 0..n {
            write!(out, ",length_{i}").unwrap();
        }
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.scenario,
                self.t,
                r.variant,
                fmt_entries(&r.coverage),
                fmt_entries(&r.band_length)
            )
            .unwrap();
        }
        out
    }

    pub fn row(&self, variant: Variant) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }
}
