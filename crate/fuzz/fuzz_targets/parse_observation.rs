#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(y) = bbci::config::parse_observation(text) {
            assert!(!y.is_empty());
            assert!(y.iter().all(|v| v.is_finite()));
        }
    }
});
