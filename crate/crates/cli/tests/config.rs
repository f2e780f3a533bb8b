use std::path::Path;

use ngproxy_cli::config::{parse_config, suggest, Command, Overrides, FULL_SCALE_REPLICATIONS};

fn sim_overrides() -> Overrides {
    Overrides {
        out: Some("out".into()),
        ..Overrides::default()
    }
}

fn parse(text: &str) -> Result<ngproxy_cli::RunConfig, Vec<String>> {
    parse_config(text, Path::new(""), &sim_overrides()).map_err(|e| e.messages)
}

#[test]
fn minimal_simulate_config_gets_defaults() {
    let cfg = parse("command = \"simulate\"\nseed = 7\n").unwrap();
    assert_eq!(cfg.command, Command::Simulate);
    assert_eq!(cfg.seed, 7);
    assert_eq!((cfg.chain.draws, cfg.chain.burn_in, cfg.chain.thin), (4000, 2000, 1));
    assert_eq!((cfg.model.ig_a, cfg.model.ig_b), (0.0, 0.0));
    let sim = cfg.simulate.unwrap();
    assert_eq!(sim.preset, "exogenous");
    assert_eq!(sim.sample_sizes, vec![250, 800]);
    assert_eq!(sim.replications, 100);
    assert_eq!(sim.estimators.len(), 4);
    assert!(cfg.estimate.is_none());
}

#[test]
fn draws_not_above_burn_in_names_both_fields() {
    let err = parse("command = \"simulate\"\nseed = 1\n[chain]\ndraws = 1000\nburn_in = 2000\n").unwrap_err();
    assert_eq!(err.len(), 1);
    assert!(err[0].contains("chain.draws") && err[0].contains("chain.burn_in"), "{err:?}");
}

#[test]
fn misspelled_key_gets_a_suggestion() {
    let err = parse("command = \"simulate\"\nseed = 1\n[chain]\nburnin = 10\n").unwrap_err();
    assert!(err[0].contains("did you mean `chain.burn_in`"), "{err:?}");
    assert_eq!(suggest("draw", &["draws", "thin"]), Some("draws"));
    assert_eq!(suggest("zzzzzzzz", &["draws", "thin"]), None);
}

#[test]
fn all_errors_are_collected() {
    let text = "command = \"simulate\"\nsed = 1\n[chain]\ndraws = \"many\"\nthin = 0\ntarget_accept = 1.5\n\
                [simulate]\npreset = \"strong\"\nestimators = [\"ng\", \"ng\", \"ols\"]\n";
    let err = parse(text).unwrap_err();
    let joined = err.join("\n");
    for needle in [
        "unknown key `sed`",
        "`seed` is required",
        "`chain.draws` must be a non-negative integer, found string",
        "`chain.thin` must be at least 1",
        "`chain.target_accept`",
        "unknown preset `strong`",
        "listed twice",
        "unknown estimator `ols`",
    ] {
        assert!(joined.contains(needle), "missing `{needle}` in\n{joined}");
    }
}

#[test]
fn seed_and_preset_overrides_win() {
    let ov = Overrides {
        seed: Some(99),
        preset: Some("endogenous".into()),
        full_scale: true,
        ..sim_overrides()
    };
    let cfg = parse_config("command = \"simulate\"\nseed = 1\n", Path::new(""), &ov).unwrap();
    assert_eq!(cfg.seed, 99);
    let sim = cfg.simulate.unwrap();
    assert_eq!(sim.preset, "endogenous");
    assert_eq!(sim.replications, FULL_SCALE_REPLICATIONS);
}

#[test]
fn command_mismatch_is_an_error() {
    let ov = Overrides {
        command: Some(Command::Estimate),
        ..sim_overrides()
    };
    let err = parse_config("command = \"simulate\"\nseed = 1\n", Path::new(""), &ov).unwrap_err();
    assert!(err.messages.iter().any(|m| m.contains("config is for `simulate`")));
}

#[test]
fn estimate_paths_resolve_against_the_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("data.csv"), "x").unwrap();
    let text = "command = \"estimate\"\nseed = 3\n[output]\ndir = \"res\"\n[estimate]\ndata = \"data.csv\"\n";
    let cfg = parse_config(text, dir.path(), &Overrides::default()).unwrap();
    let est = cfg.estimate.unwrap();
    assert_eq!(est.data, dir.path().join("data.csv"));
    assert_eq!(cfg.output.dir.unwrap(), dir.path().join("res"));
    assert_eq!((est.lags, est.horizon), (4, 20));
    assert_eq!(est.models.len(), 3);
}

#[test]
fn estimate_checks_data_window_and_models() {
    let text = "command = \"estimate\"\nseed = 3\n[estimate]\ndata = \"missing.csv\"\nsample_start = \"2000Q1\"\n\
                sample_end = \"1990Q4\"\nmodels = [\"fiscal\"]\ntax_share = -1\n";
    let err = parse_config(text, Path::new("/nonexistent"), &Overrides::default()).unwrap_err().messages.join("\n");
    for needle in ["does not exist", "is after", "unknown fiscal model `fiscal`", "tax_share", "output directory"] {
        assert!(err.contains(needle), "missing `{needle}` in\n{err}");
    }
}

#[test]
fn invalid_toml_is_one_error() {
    let err = parse("command = \n").unwrap_err();
    assert_eq!(err.len(), 1);
    assert!(err[0].starts_with("not valid TOML"));
}

#[test]
fn effective_config_round_trips() {
    let cfg = parse("command = \"simulate\"\nseed = 5\n[chain]\ndraws = 300\nburn_in = 100\n").unwrap();
    let text = cfg.to_toml();
    let again = parse_config(&text, Path::new(""), &Overrides::default()).unwrap();
    assert_eq!(cfg, again);
}

#[test]
fn presets_are_valid_configs() {
    for name in ["exogenous", "weak", "weak-alt", "endogenous"] {
        let text = ngproxy_cli::preset_text(name).unwrap();
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.simulate.unwrap().preset, name);
    }
}
