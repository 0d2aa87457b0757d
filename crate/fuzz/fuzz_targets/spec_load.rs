#![no_main]

use hlpn_core::{SpecNet, SpecNetDef};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(def) = serde_json::from_slice::<SpecNetDef>(data) {
        if let Ok(net) = SpecNet::from_def(&def) {
            let _ = net.warnings();
            let _ = net.to_dot(None);
        }
    }
});
