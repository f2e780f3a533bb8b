#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use ngproxy_cli::config::{parse_config, Command, Overrides};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let overrides = [
        Overrides::default(),
        Overrides { command: Some(Command::Simulate), out: Some("out".into()), ..Overrides::default() },
    ];
    for ov in &overrides {
        match parse_config(text, Path::new(""), ov) {
            // A valid config must survive its own canonical form.
            Ok(cfg) => {
                let again = parse_config(&cfg.to_toml(), Path::new(""), ov).expect("canonical form parses");
                assert_eq!(cfg, again);
            }
            Err(e) => assert!(!e.messages.is_empty()),
        }
    }
});
