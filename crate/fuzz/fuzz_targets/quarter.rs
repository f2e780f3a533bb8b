#![no_main]

use libfuzzer_sys::fuzz_target;
use ngproxy::fiscal::Quarter;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(q) = s.parse::<Quarter>() {
        assert_eq!(q.to_string().parse::<Quarter>().unwrap(), q);
        assert!(q.next() > q);
    }
});
