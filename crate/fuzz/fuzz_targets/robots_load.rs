#![no_main]

use hlpn_core::{build_robot_net, Environment, RobotDef};
use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;

static ENV: OnceLock<Environment> = OnceLock::new();

fuzz_target!(|data: &[u8]| {
    let env = ENV.get_or_init(|| {
        Environment::from_json(include_str!("../../crates/core/data/case_study/environment.json")).unwrap()
    });
    if let Ok(robots) = serde_json::from_slice::<Vec<RobotDef>>(data) {
        for r in &robots {
            let _ = build_robot_net(env, r);
        }
    }
});
