//! Runs the checked-in fuzz seeds through the same checks as the fuzz targets.

use std::path::PathBuf;

use esnrae::bench::{parse_report_csv, SpecDocument};
use esnrae::container::WeightContainer;
use esnrae::dataio::{parse_ucr_str, to_ucr_string, Split};
use esnrae::rae::{from_envelope, to_envelope};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn parse_ucr_seeds() {
    let mut ok = 0;
    for (name, data) in seeds("parse_ucr") {
        let text = std::str::from_utf8(&data).unwrap();
        if let Ok(d) = parse_ucr_str(text, "fuzz", Split::Train) {
            let again = parse_ucr_str(&to_ucr_string(&d), "fuzz", Split::Train).unwrap();
            assert_eq!(again, d, "{name}");
            ok += 1;
        }
    }
    assert!(ok >= 2);
}

#[test]
fn container_seeds() {
    for (name, data) in seeds("container_decode") {
        let c = WeightContainer::from_bytes(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(c.to_bytes(), data, "{name}");
    }
}

#[test]
fn envelope_seeds() {
    for (name, data) in seeds("envelope_parse") {
        let text = std::str::from_utf8(&data).unwrap();
        let model = from_envelope(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let written = to_envelope(&model).unwrap();
        assert_eq!(written, text, "{name}");
    }
}

#[test]
fn report_csv_seeds() {
    for (name, data) in seeds("report_csv") {
        let rows = parse_report_csv(std::str::from_utf8(&data).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!rows.is_empty());
    }
}

#[test]
fn spec_toml_seeds() {
    for (name, data) in seeds("spec_toml") {
        let doc =
            SpecDocument::from_toml_str(std::str::from_utf8(&data).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let spec = doc.resolve().unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(spec.validate().is_ok());
    }
}
