#![no_main]

use hlpn_core::{Environment, EnvironmentDef};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(def) = serde_json::from_slice::<EnvironmentDef>(data) {
        let _ = Environment::new(def);
    }
});
