//! Strict TOML run configuration. Every problem in a file is collected and
//! reported together; unknown keys get a spelling suggestion.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use ngproxy::fiscal::{FiscalModel, Quarter};
use ngproxy::sampler::Variant;
use ngproxy::simlab::Preset;
use serde::Serialize;
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Estimate,
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Estimate => "estimate",
            Command::Report => "report",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "simulate" => Some(Command::Simulate),
            "estimate" => Some(Command::Estimate),
            "report" => Some(Command::Report),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSettings {
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub adapt_window: usize,
    pub target_accept: f64,
    pub reject_unstable: bool,
    pub pi_scale: f64,
    pub b_scale: f64,
    pub shape_scale: f64,
    pub first_step_max_iters: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSettings {
    pub ig_a: f64,
    pub ig_b: f64,
    pub freeze_hyper_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSettings {
    pub preset: String,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub estimators: Vec<String>,
    pub lags: usize,
    pub augmented: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateSettings {
    pub data: PathBuf,
    pub sample_start: String,
    pub sample_end: String,
    pub lags: usize,
    pub horizon: usize,
    pub tax_share: f64,
    pub spend_share: f64,
    pub models: Vec<String>,
    pub new_proxy_models: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSettings {
    pub input: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportSettings {
    pub draws: bool,
}

/// Fully validated run description. Serializing it gives the canonical
/// form that is hashed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub output: OutputSettings,
    pub chain: ChainSettings,
    pub model: ModelSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportSettings>,
    pub export: ExportSettings,
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub messages: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s):", self.messages.len())?;
        for m in &self.messages {
            write!(f, "\n  - {m}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn one(message: impl Into<String>) -> Self {
        Self { messages: vec![message.into()] }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub preset: Option<String>,
    pub full_scale: bool,
}

pub const FULL_SCALE_REPLICATIONS: usize = 1000;

const TOP_KEYS: &[&str] = &["command", "seed", "output", "chain", "model", "simulate", "estimate", "report", "export"];
const OUTPUT_KEYS: &[&str] = &["dir"];
const CHAIN_KEYS: &[&str] = &[
    "draws",
    "burn_in",
    "thin",
    "adapt_window",
    "target_accept",
    "reject_unstable",
    "pi_scale",
    "b_scale",
    "shape_scale",
    "first_step_max_iters",
];
const MODEL_KEYS: &[&str] = &["ig_a", "ig_b", "freeze_hyper_variance"];
const SIMULATE_KEYS: &[&str] = &["preset", "sample_sizes", "replications", "estimators", "lags", "augmented"];
const ESTIMATE_KEYS: &[&str] = &[
    "data",
    "sample_start",
    "sample_end",
    "lags",
    "horizon",
    "tax_share",
    "spend_share",
    "models",
    "new_proxy_models",
];
const REPORT_KEYS: &[&str] = &["input"];
const EXPORT_KEYS: &[&str] = &["draws"];

/// Closest known key, if it is plausibly a misspelling.
pub fn suggest<'a>(key: &str, known: &[&'a str]) -> Option<&'a str> {
    known
        .iter()
        .map(|k| (strsim::damerau_levenshtein(key, k), strsim::jaro_winkler(key, k), *k))
        .filter(|(d, jw, _)| *d <= 2 || *jw >= 0.88)
        .min_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)))
        .map(|(_, _, k)| k)
}

struct Section<'a> {
    path: String,
    table: Option<&'a Table>,
    errors: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn raw(&self, k: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(k))
    }

    fn type_error(&mut self, k: &str, want: &str, got: &Value) {
        let key = self.key(k);
        self.errors.push(format!("`{key}` must be {want}, found {}", got.type_str()));
    }

    fn uint(&mut self, k: &str, default: Option<u64>) -> Option<u64> {
        match self.raw(k) {
            None => {
                if default.is_none() {
                    let key = self.key(k);
                    self.errors.push(format!("`{key}` is required"));
                }
                default
            }
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
            Some(Value::Integer(i)) => {
                let key = self.key(k);
                self.errors.push(format!("`{key}` must be non-negative, found {i}"));
                default
            }
            Some(v) => {
                self.type_error(k, "a non-negative integer", v);
                default
            }
        }
    }

    fn float(&mut self, k: &str, default: f64) -> f64 {
        match self.raw(k) {
            None => default,
            Some(Value::Float(f)) => *f,
            Some(Value::Integer(i)) => *i as f64,
            Some(v) => {
                self.type_error(k, "a number", v);
                default
            }
        }
    }

    fn boolean(&mut self, k: &str, default: bool) -> bool {
        match self.raw(k) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                self.type_error(k, "true or false", v);
                default
            }
        }
    }

    fn string(&mut self, k: &str) -> Option<String> {
        match self.raw(k) {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(v) => {
                self.type_error(k, "a string", v);
                None
            }
        }
    }

    fn strings(&mut self, k: &str) -> Option<Vec<String>> {
        match self.raw(k) {
            None => None,
            Some(Value::Array(a)) => {
                let out: Option<Vec<String>> = a.iter().map(|v| v.as_str().map(str::to_string)).collect();
                if out.is_none() {
                    let key = self.key(k);
                    self.errors.push(format!("`{key}` must be a list of strings"));
                }
                out
            }
            Some(v) => {
                self.type_error(k, "a list of strings", v);
                None
            }
        }
    }

    fn uints(&mut self, k: &str) -> Option<Vec<u64>> {
        match self.raw(k) {
            None => None,
            Some(Value::Array(a)) => {
                let out: Option<Vec<u64>> = a.iter().map(|v| v.as_integer().filter(|i| *i >= 0).map(|i| i as u64)).collect();
                if out.is_none() {
                    let key = self.key(k);
                    self.errors.push(format!("`{key}` must be a list of non-negative integers"));
                }
                out
            }
            Some(v) => {
                self.type_error(k, "a list of integers", v);
                None
            }
        }
    }

    fn check_unknown(&mut self, known: &[&str]) {
        let Some(t) = self.table else { return };
        for k in t.keys() {
            if !known.contains(&k.as_str()) {
                let key = self.key(k);
                let msg = match suggest(k, known) {
                    Some(s) => format!("unknown key `{key}`; did you mean `{}`?", self.key(s)),
                    None => format!("unknown key `{key}`; expected one of: {}", known.join(", ")),
                };
                self.errors.push(msg);
            }
        }
    }
}

fn subtable<'a>(root: &'a Table, name: &str, errors: &mut Vec<String>) -> Option<&'a Table> {
    match root.get(name) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(v) => {
            errors.push(format!("`{name}` must be a table, found {}", v.type_str()));
            None
        }
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

/// Parses TOML text. Relative paths are resolved against `base`.
pub fn parse_config(text: &str, base: &Path, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::one(format!("not valid TOML: {}", e.message())))?;
    validate(&root, base, overrides)
}

/// Reads and parses a config file.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::one(format!("cannot read config `{}`: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base, overrides)
}

fn validate(root: &Table, base: &Path, ov: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut errors = Vec::new();
    let tables: Vec<Option<&Table>> = ["output", "chain", "model", "simulate", "estimate", "report", "export"]
        .iter()
        .map(|n| subtable(root, n, &mut errors))
        .collect();
    let [output_t, chain_t, model_t, simulate_t, estimate_t, report_t, export_t] = tables[..] else {
        unreachable!()
    };

    let mut top = Section { path: String::new(), table: Some(root), errors: &mut errors };
    top.check_unknown(TOP_KEYS);
    let file_command = top.string("command");
    let seed = match ov.seed {
        Some(s) => Some(s),
        None => top.uint("seed", None),
    };
    let command = match (ov.command, file_command.as_deref()) {
        (Some(c), Some(f)) if Command::parse(f) != Some(c) => {
            errors.push(format!("config is for `{f}` but the `{}` command was run", c.name()));
            Some(c)
        }
        (Some(c), _) => Some(c),
        (None, Some(f)) => match Command::parse(f) {
            Some(c) => Some(c),
            None => {
                errors.push(format!("`command` must be simulate, estimate or report, found `{f}`"));
                None
            }
        },
        (None, None) => {
            errors.push("`command` is required".into());
            None
        }
    };

    let mut out_s = Section { path: "output".into(), table: output_t, errors: &mut errors };
    out_s.check_unknown(OUTPUT_KEYS);
    let output = match &ov.out {
        Some(p) => Some(p.clone()),
        None => out_s.string("dir").map(|d| resolve(base, &d)),
    };

    let mut c = Section { path: "chain".into(), table: chain_t, errors: &mut errors };
    c.check_unknown(CHAIN_KEYS);
    let chain = ChainSettings {
        draws: c.uint("draws", Some(4000)).unwrap_or(4000) as usize,
        burn_in: c.uint("burn_in", Some(2000)).unwrap_or(2000) as usize,
        thin: c.uint("thin", Some(1)).unwrap_or(1) as usize,
        adapt_window: c.uint("adapt_window", Some(100)).unwrap_or(100) as usize,
        target_accept: c.float("target_accept", 0.25),
        reject_unstable: c.boolean("reject_unstable", false),
        pi_scale: c.float("pi_scale", 1.0),
        b_scale: c.float("b_scale", 1.0),
        shape_scale: c.float("shape_scale", 1.0),
        first_step_max_iters: c.uint("first_step_max_iters", Some(500)).unwrap_or(500),
    };
    if chain.draws <= chain.burn_in {
        errors.push(format!(
            "`chain.draws` ({}) must exceed `chain.burn_in` ({}); draws count the burn-in",
            chain.draws, chain.burn_in
        ));
    }
    if chain.thin == 0 {
        errors.push("`chain.thin` must be at least 1".into());
    }
    if chain.adapt_window == 0 {
        errors.push("`chain.adapt_window` must be at least 1".into());
    }
    if !(chain.target_accept > 0.0 && chain.target_accept < 1.0) {
        errors.push(format!("`chain.target_accept` must lie in (0, 1), found {}", chain.target_accept));
    }
    for (k, v) in [("pi_scale", chain.pi_scale), ("b_scale", chain.b_scale), ("shape_scale", chain.shape_scale)] {
        if !(v > 0.0 && v.is_finite()) {
            errors.push(format!("`chain.{k}` must be positive, found {v}"));
        }
    }

    let mut m = Section { path: "model".into(), table: model_t, errors: &mut errors };
    m.check_unknown(MODEL_KEYS);
    let model = ModelSettings {
        ig_a: m.float("ig_a", 0.0),
        ig_b: m.float("ig_b", 0.0),
        freeze_hyper_variance: m.boolean("freeze_hyper_variance", false),
    };
    for (k, v) in [("ig_a", model.ig_a), ("ig_b", model.ig_b)] {
        if !(v >= 0.0 && v.is_finite()) {
            errors.push(format!("`model.{k}` must be finite and non-negative, found {v}"));
        }
    }

    let mut x = Section { path: "export".into(), table: export_t, errors: &mut errors };
    x.check_unknown(EXPORT_KEYS);
    let export = ExportSettings { draws: x.boolean("draws", true) };

    let mut s = Section { path: "simulate".into(), table: simulate_t, errors: &mut errors };
    s.check_unknown(SIMULATE_KEYS);
    let preset = ov.preset.clone().or_else(|| s.string("preset")).unwrap_or_else(|| "exogenous".into());
    let sample_sizes = s.uints("sample_sizes").unwrap_or_else(|| vec![250, 800]);
    let replications = if ov.full_scale {
        Some(FULL_SCALE_REPLICATIONS as u64)
    } else {
        s.uint("replications", Some(100))
    };
    let estimators = s
        .strings("estimators")
        .unwrap_or_else(|| simlab_order().iter().map(|v| v.label().to_string()).collect());
    let sim_lags = s.uint("lags", Some(0)).unwrap_or(0) as usize;
    let augmented = s.string("augmented").unwrap_or_else(|| "general".into());
    let simulate = if command == Some(Command::Simulate) {
        if Preset::parse(&preset).is_err() {
            let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
            errors.push(format!("unknown preset `{preset}`; expected one of: {}", names.join(", ")));
        }
        if sample_sizes.is_empty() || sample_sizes.iter().any(|&t| t < 10) {
            errors.push("`simulate.sample_sizes` must list sample sizes of at least 10".into());
        }
        if replications == Some(0) {
            errors.push("`simulate.replications` must be at least 1".into());
        }
        let mut seen = BTreeSet::new();
        for e in &estimators {
            if e.parse::<Variant>().is_err() {
                let names: Vec<&str> = Variant::ALL.iter().map(|v| v.label()).collect();
                errors.push(format!("unknown estimator `{e}`; expected one of: {}", names.join(", ")));
            }
            if !seen.insert(e) {
                errors.push(format!("estimator `{e}` listed twice"));
            }
        }
        if estimators.is_empty() {
            errors.push("`simulate.estimators` must not be empty".into());
        }
        if augmented != "general" && augmented != "simplified" {
            errors.push(format!("`simulate.augmented` must be `general` or `simplified`, found `{augmented}`"));
        }
        if output.is_none() {
            errors.push("an output directory is required (`output.dir` or --out)".into());
        }
        Some(SimulateSettings {
            preset,
            sample_sizes: sample_sizes.iter().map(|&t| t as usize).collect(),
            replications: replications.unwrap_or(100) as usize,
            estimators,
            lags: sim_lags,
            augmented,
        })
    } else {
        None
    };

    let mut e = Section { path: "estimate".into(), table: estimate_t, errors: &mut errors };
    e.check_unknown(ESTIMATE_KEYS);
    let data = e.string("data");
    let sample_start = e.string("sample_start").unwrap_or_else(|| "1950Q2".into());
    let sample_end = e.string("sample_end").unwrap_or_else(|| "2006Q4".into());
    let est_lags = e.uint("lags", Some(4)).unwrap_or(4) as usize;
    let horizon = e.uint("horizon", Some(20)).unwrap_or(20) as usize;
    let tax_share = e.float("tax_share", 0.175);
    let spend_share = e.float("spend_share", 0.091);
    let models = e
        .strings("models")
        .unwrap_or_else(|| FiscalModel::ALL.iter().map(|m| m.name().to_string()).collect());
    let new_proxy_models = e.boolean("new_proxy_models", true);
    let estimate = if command == Some(Command::Estimate) {
        let data = match data {
            Some(d) => {
                let p = resolve(base, &d);
                if !p.is_file() {
                    errors.push(format!("`estimate.data`: file `{}` does not exist", p.display()));
                }
                p
            }
            None => {
                errors.push("`estimate.data` is required".into());
                PathBuf::new()
            }
        };
        match (sample_start.parse::<Quarter>(), sample_end.parse::<Quarter>()) {
            (Ok(a), Ok(b)) if a > b => errors.push(format!("`estimate.sample_start` {a} is after `estimate.sample_end` {b}")),
            (Ok(_), Ok(_)) => {}
            (a, b) => {
                if let Err(err) = a {
                    errors.push(format!("`estimate.sample_start`: {err}"));
                }
                if let Err(err) = b {
                    errors.push(format!("`estimate.sample_end`: {err}"));
                }
            }
        }
        for (k, v) in [("tax_share", tax_share), ("spend_share", spend_share)] {
            if !(v > 0.0 && v.is_finite()) {
                errors.push(format!("`estimate.{k}` must be positive, found {v}"));
            }
        }
        for name in &models {
            if name.parse::<FiscalModel>().is_err() {
                let names: Vec<&str> = FiscalModel::ALL.iter().map(|m| m.name()).collect();
                errors.push(format!("unknown fiscal model `{name}`; expected one of: {}", names.join(", ")));
            }
        }
        if models.is_empty() {
            errors.push("`estimate.models` must not be empty".into());
        }
        if output.is_none() {
            errors.push("an output directory is required (`output.dir` or --out)".into());
        }
        Some(EstimateSettings {
            data,
            sample_start,
            sample_end,
            lags: est_lags,
            horizon,
            tax_share,
            spend_share,
            models,
            new_proxy_models,
        })
    } else {
        None
    };

    let mut r = Section { path: "report".into(), table: report_t, errors: &mut errors };
    r.check_unknown(REPORT_KEYS);
    let input = r.string("input");
    let report = if command == Some(Command::Report) {
        match input {
            Some(i) => {
                let p = resolve(base, &i);
                if !p.is_dir() {
                    errors.push(format!("`report.input`: directory `{}` does not exist", p.display()));
                }
                Some(ReportSettings { input: p })
            }
            None => {
                errors.push("`report.input` is required".into());
                None
            }
        }
    } else {
        None
    };

    if !errors.is_empty() {
        return Err(ConfigError { messages: errors });
    }
    Ok(RunConfig {
        command: command.expect("checked above"),
        seed: seed.expect("checked above"),
        output: OutputSettings { dir: output },
        chain,
        model,
        simulate,
        estimate,
        report,
        export,
    })
}

/// Estimator order of the metric tables.
pub fn simlab_order() -> [Variant; 4] {
    [
        Variant::GaussianAugmented,
        Variant::GaussianWeighting,
        Variant::NonGaussian,
        Variant::NonGaussianWeighting,
    ]
}
