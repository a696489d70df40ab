#![no_main]

use libfuzzer_sys::fuzz_target;
use narravine_core::StickerManifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = StickerManifest::from_json(text) {
            for id in m.ids() {
                assert!(m.get(id).is_some());
            }
        }
    }
});
