#![no_main]
use esnrae::bench::SpecDocument;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(doc) = SpecDocument::from_toml_str(text) {
        if let Ok(spec) = doc.resolve() {
            assert!(spec.validate().is_ok());
            let _ = spec.echo();
        }
    }
});
