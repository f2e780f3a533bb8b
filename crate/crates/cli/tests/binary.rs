use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ngproxy");

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_fiscal.csv")
}

fn ngproxy(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p
}

fn estimate_config(dir: &Path, out: &str) -> PathBuf {
    let body = format!(
        "command = \"estimate\"\nseed = 11\n[output]\ndir = \"{out}\"\n[chain]\ndraws = 600\nburn_in = 300\n\
         [estimate]\ndata = \"{}\"\nhorizon = 8\n",
        fixture().display()
    );
    let p = dir.join(format!("{out}.toml"));
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn simulate_smoke_writes_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "command = \"simulate\"\nseed = 2\n[chain]\ndraws = 500\nburn_in = 250\n\
         [simulate]\nsample_sizes = [120]\nreplications = 5\n",
    );
    let out = dir.path().join("sim");
    let o = ngproxy(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t2 = fs::read_to_string(out.join("points_T120.csv")).unwrap();
    assert_eq!(t2.lines().count(), 5, "{t2}");
    assert!(t2.starts_with("scenario,T,estimator,mean_0"));
    let t3 = fs::read_to_string(out.join("coverage_T120.csv")).unwrap();
    assert_eq!(t3.lines().count(), 5);
    let est = fs::read_to_string(out.join("estimates_T120.csv")).unwrap();
    let failures = fs::read_to_string(out.join("failures_T120.csv")).unwrap().lines().count() - 1;
    assert_eq!(est.lines().count() - 1 + 3 * failures, 5 * 4 * 3);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 2);
    let config_text = fs::read_to_string(out.join("config.toml")).unwrap();
    assert_eq!(manifest["config"].as_str().unwrap(), config_text);
    assert_eq!(manifest["config_sha256"].as_str().unwrap(), ngproxy_cli::run::sha256_hex(config_text.as_bytes()));
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 5);

    let report = ngproxy(&["report", "--config", &write_report_config(dir.path(), &out)]);
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("Point estimates, T = 120") && text.contains("Coverage and band length, T = 120"));
}

fn write_report_config(dir: &Path, input: &Path) -> String {
    let p = dir.join("report.toml");
    fs::write(&p, format!("command = \"report\"\nseed = 0\n[report]\ninput = \"{}\"\n", input.display())).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn estimate_on_fixture_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let files = [
        "summary.csv",
        "irf.csv",
        "multipliers.csv",
        "exogeneity.csv",
        "new_proxies.csv",
        "shocks.csv",
        "draws.jsonl",
    ];
    for out in ["a", "b"] {
        let cfg = estimate_config(dir.path(), out);
        let o = ngproxy(&["estimate", "--config", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        for f in files {
            assert!(dir.path().join(out).join(f).is_file(), "{out}/{f} missing");
        }
    }
    for f in files {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between identical runs");
    }
    let draws = fs::read_to_string(dir.path().join("a/draws.jsonl")).unwrap();
    // Three models plus two re-runs with the new proxies, 300 draws each.
    assert_eq!(draws.lines().count(), 5 * 300);
    let first: serde_json::Value = serde_json::from_str(draws.lines().next().unwrap()).unwrap();
    assert_eq!(first["model"], "ng-proxy-weighting");
    assert_eq!(first["b"].as_array().unwrap().len(), 3);
    assert_eq!(first["proxies"], serde_json::json!(["tfp_proxy", "tax_proxy"]));

    let summary = fs::read_to_string(dir.path().join("a/summary.csv")).unwrap();
    assert!(summary.starts_with("model,parameter,mean,q16,q50,q84\n"));
    assert!(summary.contains("fiscal-proxy-new,b23,0,0,0,0"));

    let report = ngproxy(&["report", "--config", &write_report_config(dir.path(), &dir.path().join("a"))]);
    assert!(report.status.success());
    assert!(String::from_utf8(report.stdout).unwrap().contains("Multipliers"));
}

#[test]
fn seed_override_changes_the_draws() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = estimate_config(dir.path(), "s");
    let base = ["estimate", "--config", cfg.to_str().unwrap()];
    assert!(ngproxy(&base).status.success());
    let a = fs::read(dir.path().join("s/summary.csv")).unwrap();
    let mut args = base.to_vec();
    args.extend(["--seed", "12"]);
    assert!(ngproxy(&args).status.success());
    let b = fs::read(dir.path().join("s/summary.csv")).unwrap();
    assert_ne!(a, b);
    let manifest = fs::read_to_string(dir.path().join("s/manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 12"));
}

#[test]
fn config_errors_exit_with_code_2_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "command = \"simulate\"\nseed = 1\n[chain]\ndraws = 10\nburn_in = 20\nburnin = 3\n");
    let o = ngproxy(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(String::from_utf8(o.stderr).unwrap().lines().last().unwrap()).unwrap();
    assert_eq!(err["error"], "config");
    assert_eq!(err["messages"].as_array().unwrap().len(), 2);

    let o = ngproxy(&["estimate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "date,tax,spend,output,tax_proxy,tfp_proxy\n1950Q2,1,2,3,0,1\n1950Q4,1,2,3,1,0\n").unwrap();
    let body = format!(
        "command = \"estimate\"\nseed = 1\n[output]\ndir = \"o\"\n[estimate]\ndata = \"{}\"\n",
        data.display()
    );
    let cfg = write_config(dir.path(), &body);
    let o = ngproxy(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(stderr.contains("\"runtime\"") && stderr.contains("1950Q3"), "{stderr}");
}
