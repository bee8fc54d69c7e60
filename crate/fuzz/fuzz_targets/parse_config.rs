#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = bbci::config::parse_raw(text);
        let _ = bbci::config::parse_config(text, None);
    }
});
