use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn esnrae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esnrae")).args(args).output().expect("spawn esnrae")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, n_train: &str, length: &str) -> (PathBuf, PathBuf) {
    let o =
        esnrae(&["synth", "-o", s(dir), "--name", "toy", "--n-train", n_train, "--n-test", "12", "--length", length]);
    assert!(o.status.success(), "{}", stderr(&o));
    (dir.join("toy_TRAIN.tsv"), dir.join("toy_TEST.tsv"))
}

fn labels(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').next().unwrap().to_owned()).collect()
}

fn row_shape(path: &Path) -> (usize, usize) {
    let text = std::fs::read_to_string(path).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    (rows.len(), rows[0].split(',').count() - 1)
}

#[test]
fn encode_then_classify() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = synth(dir.path(), "20", "24");
    let out = dir.path().join("enc");
    let args = [
        "encode",
        "--train",
        s(&train),
        "--test",
        s(&test),
        "--n-hidden",
        "16",
        "--connectivity",
        "0.2",
        "--n-candidates",
        "3",
        "--seed",
        "4",
        "-o",
        s(&out),
    ];
    let o = esnrae(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("# n_hidden = 16"));
    assert!(text.contains("reconstruction error:"));

    let ftrain = out.join("toy.esn-rae_TRAIN.tsv");
    let ftest = out.join("toy.esn-rae_TEST.tsv");
    assert_eq!(row_shape(&ftrain), (20, 16));
    assert_eq!(row_shape(&ftest), (12, 16));
    assert_eq!(labels(&ftrain), labels(&train));

    let model = out.join("toy.esn-rae.model");
    let first: Vec<Vec<u8>> = [&model, &ftrain, &ftest].iter().map(|p| std::fs::read(p).unwrap()).collect();
    let o = esnrae(&args);
    assert!(o.status.success());
    let second: Vec<Vec<u8>> = [&model, &ftrain, &ftest].iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(first, second, "re-running encode is byte-identical");

    let o = esnrae(&["classify", "--train", s(&ftrain), "--test", s(&ftest)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("error rate:"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = synth(dir.path(), "20", "24");
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "n_hidden = 5\nconnectivity = 0.4\nn_candidates = 2\n").unwrap();
    let o = esnrae(&[
        "encode",
        "--config",
        s(&cfg),
        "--train",
        s(&train),
        "--test",
        s(&test),
        "--n-hidden",
        "7",
        "-o",
        s(&dir.path().join("o")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("# n_hidden = 7"));
    assert!(text.contains("# connectivity = 0.4"));
}

#[test]
fn missing_file_exits_2_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope_TRAIN.tsv");
    let o =
        esnrae(&["encode", "--train", s(&missing), "--test", s(&missing), "--n-hidden", "4", "--connectivity", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope_TRAIN.tsv"), "{}", stderr(&o));

    let o = esnrae(&["noise", s(&missing), "--snr", "10", "-o", s(&dir.path().join("x.tsv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad_TRAIN.tsv");
    std::fs::write(&bad, "1,0.5,0.2\n0,abc,1\n").unwrap();
    let o = esnrae(&["classify", "--train", s(&bad), "--test", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn unknown_method_exits_2_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.toml");
    std::fs::write(
        &spec,
        "name = \"x\"\nn_hidden = 8\nconnectivity = 0.2\nmethods = [\"esn-rae\", \"lstm\"]\n[synthetic]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = esnrae(&["bench", s(&spec), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lstm"));
    assert!(!out.exists());

    let o = esnrae(&["bench", s(&spec), "--methods", "raw,bogus", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(esnrae(&["encode", "--bogus-flag"]).status.code(), Some(2));
    assert_eq!(esnrae(&[]).status.code(), Some(2));
}

#[test]
fn bundled_synthetic_spec_is_fast_and_reproducible() {
    let spec = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs/synthetic.toml");
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let o = esnrae(&["bench", s(&spec), "-o", s(dir.path())]);
    assert!(t0.elapsed() < Duration::from_secs(10));
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read(dir.path().join("synthetic.csv")).unwrap();
    let md = std::fs::read_to_string(dir.path().join("synthetic.md")).unwrap();
    assert!(md.contains("| synthetic | noise free |"));
    assert!(md.contains("P1 (%)"));

    let again = tempfile::tempdir().unwrap();
    let o = esnrae(&["bench", s(&spec), "-o", s(again.path())]);
    assert!(o.status.success());
    assert_eq!(csv, std::fs::read(again.path().join("synthetic.csv")).unwrap());
}

#[test]
fn failed_cells_exit_4_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("tiny.toml");
    std::fs::write(
        &spec,
        "name = \"tiny\"\nn_hidden = 4\nconnectivity = 0.5\nn_runs = 1\nmethods = [\"raw\"]\n[synthetic]\nn_train = 1\nn_test = 3\nlength = 6\n",
    )
    .unwrap();
    let o = esnrae(&["bench", s(&spec), "-o", s(dir.path())]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("tiny.csv")).unwrap();
    assert!(csv.lines().last().unwrap().contains("2 classes"));
}

#[test]
fn noise_keeps_labels_and_hits_target() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = synth(dir.path(), "60", "200");
    let a = dir.path().join("a.tsv");
    let b = dir.path().join("b.tsv");
    let o = esnrae(&["noise", s(&train), "--snr", "50", "--seed", "3", "-o", s(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o).lines().find(|l| l.starts_with("measured SNR")).unwrap().to_owned();
    let snr: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((49.5..=50.5).contains(&snr), "{line}");
    assert_eq!(labels(&a), labels(&train));

    esnrae(&["noise", s(&train), "--snr", "50", "--seed", "3", "-o", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
