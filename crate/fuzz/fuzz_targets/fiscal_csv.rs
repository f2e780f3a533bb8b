#![no_main]

use libfuzzer_sys::fuzz_target;
use ngproxy::fiscal::{build_design, parse_dataset, SchemaConfig};

fuzz_target!(|data: &[u8]| {
    let all = SchemaConfig { sample: None, ..SchemaConfig::default() };
    for schema in [all, SchemaConfig::default()] {
        if let Ok(ds) = parse_dataset(data, &schema) {
            assert_eq!(ds.values().nrows(), ds.dates().len());
            let _ = build_design(&ds, 1);
            let _ = ds.panel(4);
        }
    }
});
