#![no_main]

use libfuzzer_sys::fuzz_target;
use narravine_core::fsm::{parse_log, replay_log, FsmConfig, SessionState};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = parse_log(text) {
        let _ = replay_log(SessionState::new(3, "fuzz"), &records, &FsmConfig::default());
    }
});
