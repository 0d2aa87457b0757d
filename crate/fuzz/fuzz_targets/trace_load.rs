#![no_main]

use hlpn_core::{Trace, Hlpn};
use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;

static MODEL: OnceLock<Hlpn> = OnceLock::new();

fn model() -> Hlpn {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../crates/core/data/case_study");
    hlpn_core::cli::load_model(
        format!("{dir}/environment.json").as_ref(),
        format!("{dir}/robots.json").as_ref(),
        format!("{dir}/mission.json").as_ref(),
    )
    .ok()
    .expect("bundled case study loads")
    .model
}

fuzz_target!(|data: &[u8]| {
    let m = MODEL.get_or_init(model);
    for line in data.split(|&b| b == b'\n') {
        if let Ok(t) = serde_json::from_slice::<Trace>(line) {
            let _ = hlpn_core::replay(&t, m);
            let _ = hlpn_core::verifier::observations(&t, m);
        }
    }
});
