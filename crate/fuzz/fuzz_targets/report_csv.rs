#![no_main]
use esnrae::bench::parse_report_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_report_csv(text);
    }
});
