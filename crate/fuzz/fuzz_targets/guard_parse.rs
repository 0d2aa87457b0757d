#![no_main]

use hlpn_core::logic::parse_guard;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_guard(text, 64);
    }
});
