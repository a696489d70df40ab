#![no_main]

use libfuzzer_sys::fuzz_target;
use narravine_portnet::frame::{decode, encode, read_frame};

fuzz_target!(|data: &[u8]| {
    if let Ok((frame, used)) = decode(data) {
        assert!(used <= data.len());
        // Whatever decodes re-encodes to a frame of the same shape.
        let bytes = encode(&frame).expect("decoded frames encode");
        let (again, n) = decode(&bytes).expect("re-encoded frame decodes");
        assert_eq!(n, bytes.len());
        assert_eq!(std::mem::discriminant(&again), std::mem::discriminant(&frame));
    }
    let mut reader = data;
    while let Ok(Some(_)) = read_frame(&mut reader) {}
});
