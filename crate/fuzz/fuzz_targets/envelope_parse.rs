#![no_main]
use esnrae::rae::{from_envelope, to_envelope};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = from_envelope(text) {
        // Compare text, not models: failed candidates carry NaN errors.
        let written = to_envelope(&model).expect("loaded model serialises");
        let reread = from_envelope(&written).expect("re-read");
        assert_eq!(to_envelope(&reread).expect("serialise again"), written);
    }
});
