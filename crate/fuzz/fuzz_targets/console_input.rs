#![no_main]

use libfuzzer_sys::fuzz_target;
use narravine_core::StickerManifest;
use narravine_supervisor::gateway::parse_input;

fuzz_target!(|data: &[u8]| {
    let manifest = StickerManifest::canonical();
    let _ = parse_input(data, &manifest);
});
