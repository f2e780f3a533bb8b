//! Trivariate fiscal application: variables (τ, g, y), a narrative tax proxy
//! targeting ε_τ and a TFP proxy targeting ε_y.
//!
//! The baseline model weights the likelihood with all four non-target
//! proxy moments and estimates their means. Two Gaussian comparison models
//! impose exogeneity of one proxy plus one zero restriction each. After the
//! baseline run the proxies can be residualized on its median shocks and
//! fed back into the comparison models.

mod data;
pub mod fixture;
mod mertens;
mod post;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::DMatrix;

pub use data::{
    build_design, load_dataset, parse_dataset, FiscalDataset, ProxyColumn, Quarter, SchemaConfig, DUMMY_QUARTER, OUTPUT,
    SPEND, TAX, VARIABLES,
};
pub use mertens::{map_to_mertens, MertensParams};
pub use post::{
    compute_multipliers, construct_new_proxy, draw_innovations, draw_irf, draw_multipliers, exogeneity_report,
    median_shocks, shock_moments, ExogeneityReport, GdpShares, MultiplierResult, PathBands, BANDS, IMPACT_TOL,
};

use crate::error::{Error, Result};
use crate::likelihood::ProxySet;
use crate::sampler::{run_chain, ChainConfig, ChainOutput, LabelingMode, ModelSpec, Variant};
use crate::stats::quantile;
use crate::var::VarSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FiscalModel {
    /// Skewed-t shocks, both proxies, estimated exogeneity means.
    ProxyWeighting,
    /// Gaussian, exogenous tax proxy, spending does not react to ε_y on impact.
    FiscalProxy,
    /// Gaussian, exogenous TFP proxy, spending does not react to ε_τ on impact.
    NonFiscalProxy,
}

impl FiscalModel {
    pub const ALL: [FiscalModel; 3] = [FiscalModel::ProxyWeighting, FiscalModel::FiscalProxy, FiscalModel::NonFiscalProxy];

    pub fn name(&self) -> &'static str {
        match self {
            FiscalModel::ProxyWeighting => "ng-proxy-weighting",
            FiscalModel::FiscalProxy => "fiscal-proxy",
            FiscalModel::NonFiscalProxy => "non-fiscal-proxy",
        }
    }

    /// Proxy columns and their target shocks. For the baseline the TFP proxy
    /// comes first so it claims the output shock before the tax proxy labels.
    pub fn proxy_columns(&self) -> Vec<(ProxyColumn, usize)> {
        match self {
            FiscalModel::ProxyWeighting => vec![(ProxyColumn::Tfp, OUTPUT), (ProxyColumn::Tax, TAX)],
            FiscalModel::FiscalProxy => vec![(ProxyColumn::Tax, TAX)],
            FiscalModel::NonFiscalProxy => vec![(ProxyColumn::Tfp, OUTPUT)],
        }
    }

    pub fn spec(&self, lags: usize) -> ModelSpec {
        let var = VarSpec::new(lags, false);
        match self {
            FiscalModel::ProxyWeighting => {
                let mut s = ModelSpec::new(Variant::NonGaussianWeighting, var);
                s.labeling = LabelingMode::ProxyCorrelation;
                s
            }
            FiscalModel::FiscalProxy => {
                let mut s = ModelSpec::new(Variant::GaussianWeighting, var);
                s.zero_restrictions = vec![(SPEND, OUTPUT)];
                s.labeling = LabelingMode::None;
                s
            }
            FiscalModel::NonFiscalProxy => {
                let mut s = ModelSpec::new(Variant::GaussianWeighting, var);
                s.zero_restrictions = vec![(SPEND, TAX)];
                s.labeling = LabelingMode::None;
                s
            }
        }
    }
}

impl fmt::Display for FiscalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FiscalModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FiscalModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown fiscal model `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiscalOptions {
    pub lags: usize,
    pub horizon: usize,
    pub shares: GdpShares,
    pub chain: ChainConfig,
    pub models: Vec<FiscalModel>,
    /// Re-estimate the Gaussian comparison models with residualized proxies.
    pub new_proxy_models: bool,
    /// `IG(a, b)` hyperprior of the baseline's exogeneity variances.
    pub ig: (f64, f64),
    pub freeze_hyper_variance: bool,
}

impl Default for FiscalOptions {
    fn default() -> Self {
        Self {
            lags: 4,
            horizon: 20,
            shares: GdpShares::default(),
            chain: ChainConfig::default(),
            models: FiscalModel::ALL.to_vec(),
            new_proxy_models: true,
            ig: (0.0, 0.0),
            freeze_hyper_variance: false,
        }
    }
}

/// Posterior output of one model plus its per-draw summaries.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub model: FiscalModel,
    /// Model name, suffixed `-new` when run on the residualized proxies.
    pub label: String,
    pub proxy_names: Vec<String>,
    pub output: ChainOutput,
    pub innovations: Vec<DMatrix<f64>>,
    pub multipliers: MultiplierResult,
    /// `[h]` → 16/50/84 percentile matrices of the impulse responses.
    pub irf: Vec<[DMatrix<f64>; 3]>,
    /// `None` where the mapping is degenerate for that draw.
    pub mertens: Vec<Option<MertensParams>>,
    pub exogeneity: ExogeneityReport,
    pub moments: Vec<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewProxies {
    pub dates: Vec<Quarter>,
    pub tax_old: Vec<f64>,
    pub tax_new: Vec<f64>,
    pub tfp_old: Vec<f64>,
    pub tfp_new: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FiscalRun {
    pub dates: Vec<Quarter>,
    pub runs: Vec<ModelRun>,
    pub new_proxies: Option<NewProxies>,
    pub warnings: Vec<String>,
}

impl FiscalRun {
    pub fn run(&self, label: &str) -> Option<&ModelRun> {
        self.runs.iter().find(|r| r.label == label)
    }
}

/// Column signs chosen so the diagonal of B is positive.
fn positive_diagonal(b: &mut DMatrix<f64>) {
    for j in 0..b.ncols() {
        if b[(j, j)] < 0.0 {
            b.column_mut(j).neg_mut();
        }
    }
}

/// Runs one model with the given effective-sample proxy columns; the chain
/// uses `stream` of the configured seed.
pub fn estimate_model(
    dataset: &FiscalDataset,
    model: FiscalModel,
    label: &str,
    proxy_cols: &BTreeMap<ProxyColumn, Vec<f64>>,
    opts: &FiscalOptions,
    stream: u64,
) -> Result<(ModelRun, Vec<String>)> {
    let panel = dataset.panel(opts.lags)?;
    let (design, mut warnings) = build_design(dataset, opts.lags)?;
    let cols = model.proxy_columns();
    let t = panel.nobs();
    let z = DMatrix::from_fn(t, cols.len(), |r, k| proxy_cols[&cols[k].0][r]);
    let proxies = ProxySet::new(z, cols.iter().map(|c| c.1).collect(), 3)?;
    let mut spec = model.spec(opts.lags);
    (spec.ig_a, spec.ig_b) = opts.ig;
    spec.freeze_hyper_variance = opts.freeze_hyper_variance;
    let chain = ChainConfig { stream, ..opts.chain.clone() };
    let mut output = run_chain(&panel, &design, &proxies, &spec, &chain)?;
    if model != FiscalModel::ProxyWeighting {
        for d in &mut output.draws {
            positive_diagonal(&mut d.b);
        }
    }
    warnings.extend(output.warnings.iter().map(|w| format!("{label}: {w}")));
    let innovations = draw_innovations(&output.draws, &panel, &design)?;
    let multipliers = compute_multipliers(&output.draws, opts.horizon, opts.shares)?;
    if multipliers.flagged {
        warnings.push(format!("{label}: {} draws excluded from the multipliers", multipliers.excluded));
    }
    let irfs = output
        .draws
        .iter()
        .map(|d| draw_irf(d, opts.horizon))
        .collect::<Result<Vec<_>>>()?;
    let irf = (0..=opts.horizon)
        .map(|h| {
            BANDS.map(|tau| {
                DMatrix::from_fn(3, 3, |i, j| quantile(&irfs.iter().map(|r| r[h][(i, j)]).collect::<Vec<_>>(), tau))
            })
        })
        .collect();
    let mertens = output.draws.iter().map(|d| map_to_mertens(&d.b).ok()).collect();
    let exogeneity = exogeneity_report(&innovations, &proxies)?;
    let moments = shock_moments(&innovations)?;
    Ok((
        ModelRun {
            model,
            label: label.to_string(),
            proxy_names: cols.iter().map(|c| c.0.name().to_string()).collect(),
            output,
            innovations,
            multipliers,
            irf,
            mertens,
            exogeneity,
            moments,
        },
        warnings,
    ))
}

/// Full application: the requested models (chain streams 0, 1, … in run
/// order), then (if the baseline ran) the
/// residualized proxies and optionally the comparison models on them.
pub fn run_fiscal(dataset: &FiscalDataset, opts: &FiscalOptions) -> Result<FiscalRun> {
    if opts.models.is_empty() {
        return Err(Error::InvalidInput("no fiscal models requested".into()));
    }
    let lags = opts.lags;
    let dates = dataset.effective_dates(lags).to_vec();
    let old: BTreeMap<ProxyColumn, Vec<f64>> = [ProxyColumn::Tax, ProxyColumn::Tfp]
        .into_iter()
        .map(|c| (c, dataset.proxy(c)[lags..].to_vec()))
        .collect();
    let mut runs = Vec::new();
    let mut warnings = Vec::new();
    for &model in &opts.models {
        log::info!("estimating {model}");
        let (run, w) = estimate_model(dataset, model, model.name(), &old, opts, runs.len() as u64)?;
        runs.push(run);
        warnings.extend(w);
    }
    let mut new_proxies = None;
    if let Some(base) = runs.iter().find(|r| r.model == FiscalModel::ProxyWeighting) {
        let med = median_shocks(&base.innovations)?;
        let pick = |a: usize, b: usize| DMatrix::from_fn(med.nrows(), 2, |r, c| med[(r, if c == 0 { a } else { b })]);
        let tax_new = construct_new_proxy(&old[&ProxyColumn::Tax], &pick(SPEND, OUTPUT))?;
        let tfp_new = construct_new_proxy(&old[&ProxyColumn::Tfp], &pick(TAX, SPEND))?;
        let np = NewProxies {
            dates: dates.clone(),
            tax_old: old[&ProxyColumn::Tax].clone(),
            tax_new,
            tfp_old: old[&ProxyColumn::Tfp].clone(),
            tfp_new,
        };
        if opts.new_proxy_models {
            let cols: BTreeMap<ProxyColumn, Vec<f64>> = [
                (ProxyColumn::Tax, standardize(&np.tax_new)),
                (ProxyColumn::Tfp, standardize(&np.tfp_new)),
            ]
            .into_iter()
            .collect();
            for model in [FiscalModel::FiscalProxy, FiscalModel::NonFiscalProxy] {
                let label = format!("{}-new", model.name());
                log::info!("estimating {label}");
                let (run, w) = estimate_model(dataset, model, &label, &cols, opts, runs.len() as u64)?;
                runs.push(run);
                warnings.extend(w);
            }
        }
        new_proxies = Some(np);
    }
    Ok(FiscalRun {
        dates,
        runs,
        new_proxies,
        warnings,
    })
}

fn standardize(z: &[f64]) -> Vec<f64> {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    z.iter().map(|v| (v - mean) / sd).collect()
}

fn summary_row(out: &mut String, label: &str, name: &str, values: &[f64]) {
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    writeln!(
        out,
        "{label},{name},{mean},{},{},{}",
        quantile(values, BANDS[0]),
        quantile(values, BANDS[1]),
        quantile(values, BANDS[2])
    )
    .unwrap();
}

impl FiscalRun {
    /// `model,parameter,mean,q16,q50,q84`: B entries, shock shapes,
    /// exogeneity means, the simultaneous-equation parameters and the
    /// sample skewness/kurtosis of each shock.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("model,parameter,mean,q16,q50,q84\n");
        for run in &self.runs {
            let draws = &run.output.draws;
            let l = &run.label;
            for i in 0..3 {
                for j in 0..3 {
                    let v: Vec<f64> = draws.iter().map(|d| d.b[(i, j)]).collect();
                    summary_row(&mut out, l, &format!("b{}{}", i + 1, j + 1), &v);
                }
            }
            if draws.first().is_some_and(|d| !d.lambda.is_empty()) {
                for j in 0..3 {
                    let lam: Vec<f64> = draws.iter().map(|d| d.lambda[j]).collect();
                    summary_row(&mut out, l, &format!("lambda_{}", VARIABLES[j]), &lam);
                    let q: Vec<f64> = draws.iter().map(|d| d.q[j]).collect();
                    summary_row(&mut out, l, &format!("q_{}", VARIABLES[j]), &q);
                }
            }
            if run.model == FiscalModel::ProxyWeighting {
                let targets: Vec<usize> = run.model.proxy_columns().iter().map(|c| c.1).collect();
                for (k, name) in run.proxy_names.iter().enumerate() {
                    for j in (0..3).filter(|&j| j != targets[k]) {
                        let v: Vec<f64> = draws.iter().map(|d| d.exogeneity.mu()[(k, j)]).collect();
                        summary_row(&mut out, l, &format!("mu_{name}_{}", VARIABLES[j]), &v);
                    }
                }
            }
            let mapped: Vec<[f64; 9]> = run.mertens.iter().flatten().map(|m| m.to_array()).collect();
            if !mapped.is_empty() {
                for (p, name) in MertensParams::NAMES.iter().enumerate() {
                    let v: Vec<f64> = mapped.iter().map(|m| m[p]).collect();
                    summary_row(&mut out, l, name, &v);
                }
            }
            for j in 0..3 {
                let s: Vec<f64> = run.moments.iter().map(|m| m[j].0).collect();
                summary_row(&mut out, l, &format!("skewness_{}", VARIABLES[j]), &s);
                let k: Vec<f64> = run.moments.iter().map(|m| m[j].1).collect();
                summary_row(&mut out, l, &format!("kurtosis_{}", VARIABLES[j]), &k);
            }
        }
        out
    }

    /// `model,horizon,variable,shock,q16,q50,q84`.
    pub fn irf_csv(&self) -> String {
        let mut out = String::from("model,horizon,variable,shock,q16,q50,q84\n");
        for run in &self.runs {
            for (h, bands) in run.irf.iter().enumerate() {
                for i in 0..3 {
                    for j in 0..3 {
                        writeln!(
                            out,
                            "{},{h},{},{},{},{},{}",
                            run.label, VARIABLES[i], VARIABLES[j], bands[0][(i, j)], bands[1][(i, j)], bands[2][(i, j)]
                        )
                        .unwrap();
                    }
                }
            }
        }
        out
    }

    /// `model,horizon,tax_q16..tax_q84,spend_q16..spend_q84,diff_q16..diff_q84`;
    /// `diff` is spending minus tax.
    pub fn multipliers_csv(&self) -> String {
        let mut out = String::from(
            "model,horizon,tax_q16,tax_q50,tax_q84,spend_q16,spend_q50,spend_q84,diff_q16,diff_q50,diff_q84\n",
        );
        for run in &self.runs {
            let m = &run.multipliers;
            for &h in &m.horizons {
                write!(out, "{},{h}", run.label).unwrap();
                for p in [&m.tax, &m.spend, &m.difference] {
                    write!(out, ",{},{},{}", p.lower[h], p.median[h], p.upper[h]).unwrap();
                }
                out.push('\n');
            }
        }
        out
    }

    /// `model,proxy,shock,q16,q50,q84,prob_below_zero` for corr(z_k, ε_j).
    pub fn exogeneity_csv(&self) -> String {
        let mut out = String::from("model,proxy,shock,q16,q50,q84,prob_below_zero\n");
        for run in &self.runs {
            for (k, name) in run.proxy_names.iter().enumerate() {
                for j in 0..3 {
                    let e = &run.exogeneity;
                    writeln!(
                        out,
                        "{},{name},{},{},{},{},{}",
                        run.label,
                        VARIABLES[j],
                        e.quantile(k, j, BANDS[0]),
                        e.quantile(k, j, BANDS[1]),
                        e.quantile(k, j, BANDS[2]),
                        e.prob_below_zero(k, j)
                    )
                    .unwrap();
                }
            }
        }
        out
    }

    /// `date,tax_proxy,tax_proxy_new,tfp_proxy,tfp_proxy_new`; header only
    /// when the baseline model was not run.
    pub fn new_proxies_csv(&self) -> String {
        let mut out = String::from("date,tax_proxy,tax_proxy_new,tfp_proxy,tfp_proxy_new\n");
        if let Some(np) = &self.new_proxies {
            for (i, d) in np.dates.iter().enumerate() {
                writeln!(out, "{d},{},{},{},{}", np.tax_old[i], np.tax_new[i], np.tfp_old[i], np.tfp_new[i]).unwrap();
            }
        }
        out
    }

    /// `model,date,tax,spend,output`: posterior-median structural shocks.
    pub fn median_shocks_csv(&self) -> Result<String> {
        let mut out = String::from("model,date,tax,spend,output\n");
        for run in &self.runs {
            let med = median_shocks(&run.innovations)?;
            for (t, d) in self.dates.iter().enumerate() {
                writeln!(out, "{},{d},{},{},{}", run.label, med[(t, 0)], med[(t, 1)], med[(t, 2)]).unwrap();
            }
        }
        Ok(out)
    }
}
