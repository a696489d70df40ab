#![no_main]

use libfuzzer_sys::fuzz_target;
use narravine_core::scene::Scene;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = Scene::parse(text, 7);
    }
});
