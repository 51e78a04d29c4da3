#![no_main]
use esnrae::dataio::{parse_ucr_str, to_ucr_string, Split};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(d) = parse_ucr_str(text, "fuzz", Split::Train) {
        let again = parse_ucr_str(&to_ucr_string(&d), "fuzz", Split::Train).expect("re-parse of written file");
        assert_eq!(again, d);
    }
});
