//! Executes a validated [`RunConfig`] and writes its outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ngproxy::fiscal::{
    load_dataset, run_fiscal, FiscalModel, FiscalOptions, FiscalRun, GdpShares, Quarter, SchemaConfig, VARIABLES,
};
use ngproxy::proxy::AugmentedConfig;
use ngproxy::sampler::{ChainConfig, Variant};
use ngproxy::simlab::{run_scenario, Preset, Scenario};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, SimulateSettings};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] ngproxy::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

pub type RunResult<T> = std::result::Result<T, RunError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

fn write_file(dir: &Path, name: &str, contents: &str, outputs: &mut Vec<PathBuf>) -> RunResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io_err(&path))?;
    outputs.push(path);
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn chain_config(cfg: &RunConfig) -> ChainConfig {
    let c = &cfg.chain;
    let mut chain = ChainConfig {
        draws: c.draws,
        burn_in: c.burn_in,
        thin: c.thin,
        seed: cfg.seed,
        stream: 0,
        pi_scale: c.pi_scale,
        b_scale: c.b_scale,
        shape_scale: c.shape_scale,
        adapt_window: c.adapt_window,
        target_accept: c.target_accept,
        reject_unstable: c.reject_unstable,
        ..ChainConfig::default()
    };
    chain.first_step.max_iters = c.first_step_max_iters;
    chain
}

/// Scenario for one sample size of a `simulate` run.
pub fn scenario(cfg: &RunConfig, sim: &SimulateSettings, t: usize) -> RunResult<Scenario> {
    let preset = Preset::parse(&sim.preset)?;
    let mut s = Scenario::preset(preset, t);
    s.replications = sim.replications;
    s.estimators = sim.estimators.iter().map(|e| e.parse::<Variant>()).collect::<Result<_, _>>()?;
    s.seed = cfg.seed;
    s.lags = sim.lags;
    s.augmented = if sim.augmented == "simplified" {
        AugmentedConfig::simplified()
    } else {
        AugmentedConfig::general()
    };
    s.freeze_hyper_variance = cfg.model.freeze_hyper_variance;
    Ok(s)
}

/// Runs the configured command; returns the files written (manifest last).
pub fn execute(cfg: &RunConfig) -> RunResult<Vec<PathBuf>> {
    match cfg.command {
        crate::config::Command::Simulate => simulate(cfg),
        crate::config::Command::Estimate => estimate(cfg),
        crate::config::Command::Report => {
            let input = &cfg.report.as_ref().expect("validated").input;
            let text = crate::report::render(input)?;
            print!("{text}");
            match &cfg.output.dir {
                Some(dir) => {
                    fs::create_dir_all(dir).map_err(io_err(dir))?;
                    let mut outputs = Vec::new();
                    write_file(dir, "report.txt", &text, &mut outputs)?;
                    finish(cfg, dir, outputs)
                }
                None => Ok(Vec::new()),
            }
        }
    }
}

fn out_dir(cfg: &RunConfig) -> RunResult<&Path> {
    let dir = cfg.output.dir.as_deref().expect("validated");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    Ok(dir)
}

fn simulate(cfg: &RunConfig) -> RunResult<Vec<PathBuf>> {
    let sim = cfg.simulate.as_ref().expect("validated");
    let dir = out_dir(cfg)?;
    let chain = chain_config(cfg);
    let mut outputs = Vec::new();
    for &t in &sim.sample_sizes {
        let s = scenario(cfg, sim, t)?;
        log::info!("simulating {} at T = {t}, {} replications", s.name, s.replications);
        let outcome = run_scenario(&s, &chain)?;
        for row in outcome.table.rows.iter().filter(|r| r.flagged) {
            log::warn!("{}: {} of {} replications failed", row.variant, row.failed, s.replications);
        }
        write_file(dir, &format!("points_T{t}.csv"), &outcome.table.point_csv(), &mut outputs)?;
        write_file(dir, &format!("coverage_T{t}.csv"), &outcome.table.coverage_csv(), &mut outputs)?;
        let mut est = String::from("replication,estimator,row,truth,median,q16,q84\n");
        let mut sorted = outcome.estimates.clone();
        sorted.sort_by_key(|e| (e.replication, s.estimators.iter().position(|&v| v == e.variant)));
        for e in &sorted {
            for (i, truth) in outcome.table.truth.iter().enumerate() {
                writeln!(
                    est,
                    "{},{},{i},{truth},{},{},{}",
                    e.replication, e.variant, e.median[i], e.lower[i], e.upper[i]
                )
                .unwrap();
            }
        }
        write_file(dir, &format!("estimates_T{t}.csv"), &est, &mut outputs)?;
        let mut fail = String::from("replication,estimator,message\n");
        let mut failures = outcome.failures.clone();
        failures.sort_by_key(|f| (f.0, f.1.label()));
        for (r, v, msg) in &failures {
            writeln!(fail, "{r},{v},\"{}\"", msg.replace('"', "'")).unwrap();
        }
        write_file(dir, &format!("failures_T{t}.csv"), &fail, &mut outputs)?;
    }
    finish(cfg, dir, outputs)
}

pub fn fiscal_options(cfg: &RunConfig) -> RunResult<FiscalOptions> {
    let est = cfg.estimate.as_ref().expect("validated");
    Ok(FiscalOptions {
        lags: est.lags,
        horizon: est.horizon,
        shares: GdpShares { tax: est.tax_share, spend: est.spend_share },
        chain: chain_config(cfg),
        models: est.models.iter().map(|m| m.parse::<FiscalModel>()).collect::<Result<_, _>>()?,
        new_proxy_models: est.new_proxy_models,
        ig: (cfg.model.ig_a, cfg.model.ig_b),
        freeze_hyper_variance: cfg.model.freeze_hyper_variance,
    })
}

fn estimate(cfg: &RunConfig) -> RunResult<Vec<PathBuf>> {
    let est = cfg.estimate.as_ref().expect("validated");
    let parse_q = |s: &str| s.parse::<Quarter>().map_err(RunError::Model);
    let schema = SchemaConfig {
        sample: Some((parse_q(&est.sample_start)?, parse_q(&est.sample_end)?)),
        ..SchemaConfig::default()
    };
    let dataset = load_dataset(&est.data, &schema)?;
    let opts = fiscal_options(cfg)?;
    let dir = out_dir(cfg)?;
    let run = run_fiscal(&dataset, &opts)?;
    for w in &run.warnings {
        log::warn!("{w}");
    }
    let mut outputs = Vec::new();
    write_file(dir, "summary.csv", &run.summary_csv(), &mut outputs)?;
    write_file(dir, "irf.csv", &run.irf_csv(), &mut outputs)?;
    write_file(dir, "multipliers.csv", &run.multipliers_csv(), &mut outputs)?;
    write_file(dir, "exogeneity.csv", &run.exogeneity_csv(), &mut outputs)?;
    write_file(dir, "new_proxies.csv", &run.new_proxies_csv(), &mut outputs)?;
    write_file(dir, "shocks.csv", &run.median_shocks_csv()?, &mut outputs)?;
    if cfg.export.draws {
        write_file(dir, "draws.jsonl", &draws_jsonl(&run), &mut outputs)?;
    }
    finish(cfg, dir, outputs)
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// One JSON object per retained draw and model.
pub fn draws_jsonl(run: &FiscalRun) -> String {
    let mut out = String::new();
    for m in &run.runs {
        for (i, d) in m.output.draws.iter().enumerate() {
            let mertens = m.mertens[i].as_ref().map(|p| {
                let vals = p.to_array();
                ngproxy::fiscal::MertensParams::NAMES
                    .iter()
                    .zip(vals)
                    .map(|(k, v)| ((*k).to_string(), json!(v)))
                    .collect::<serde_json::Map<_, _>>()
            });
            let line = json!({
                "model": m.label,
                "iteration": d.iteration,
                "log_posterior": d.log_posterior,
                "variables": VARIABLES,
                "b": matrix_rows(&d.b),
                "lambda": d.lambda,
                "q": d.q,
                "proxies": m.proxy_names,
                "mu": matrix_rows(d.exogeneity.mu()),
                "sigma2": matrix_rows(d.exogeneity.sigma2()),
                "skewness": m.moments[i].iter().map(|x| x.0).collect::<Vec<_>>(),
                "kurtosis": m.moments[i].iter().map(|x| x.1).collect::<Vec<_>>(),
                "proxy_corr": matrix_rows(&m.exogeneity.corr[i]),
                "mertens": mertens,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
    }
    out
}

/// Writes `config.toml` and `manifest.json` next to the outputs.
fn finish(cfg: &RunConfig, dir: &Path, mut outputs: Vec<PathBuf>) -> RunResult<Vec<PathBuf>> {
    let text = cfg.to_toml();
    write_file(dir, "config.toml", &text, &mut outputs)?;
    let mut files = Vec::new();
    for p in &outputs {
        let bytes = fs::read(p).map_err(io_err(p))?;
        files.push(json!({
            "file": p.file_name().map(|f| f.to_string_lossy().into_owned()),
            "sha256": sha256_hex(&bytes),
            "bytes": bytes.len(),
        }));
    }
    let manifest = json!({
        "command": cfg.command.name(),
        "seed": cfg.seed,
        "config_sha256": sha256_hex(text.as_bytes()),
        "config": text,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
        "outputs": files,
    });
    let body = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Other(e.to_string()))?;
    write_file(dir, "manifest.json", &(body + "\n"), &mut outputs)?;
    Ok(outputs)
}
