#![no_main]

use libfuzzer_sys::fuzz_target;
use narravine_core::store::{compute_metrics, TrialRecord};

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = serde_json::from_slice::<TrialRecord>(data) {
        let m = compute_metrics(std::slice::from_ref(&record)).expect("one record");
        assert!((0.0..=1.0).contains(&m.success_rate));
        assert!((0.0..=1.0).contains(&m.vlm_agreement));
    }
});
