#![no_main]

use hlpn_core::ltl::{compile_with_initial, parse_formula, CompileOptions};
use hlpn_core::logic::Observation;
use hlpn_core::Environment;
use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;

static ENV: OnceLock<Environment> = OnceLock::new();

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(f) = parse_formula(text) else { return };
    // Display output must parse back to the same formula.
    assert_eq!(parse_formula(&f.to_string()).as_ref(), Ok(&f));
    let env = ENV.get_or_init(|| {
        Environment::from_json(include_str!("../../crates/core/data/case_study/environment.json")).unwrap()
    });
    let opts = CompileOptions { max_states: 256 };
    let _ = compile_with_initial(&f, env, Observation(data.len() as u64 & 0xf), opts);
});
