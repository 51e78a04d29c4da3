//! `esnrae` command-line driver.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical failure,
//! 4 benchmark finished with invalid cells.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use esnrae::bench::{emit_report, run_experiment, to_markdown, ExperimentSpec, LevelValue, ReportFormat, SpecDocument};
use esnrae::classify::{evaluate, train_classifier, ClassifierParams};
use esnrae::dataio::{
    inject_noise, measured_snr, normalize, parse_ucr, synthetic, unify_labels, write_ucr, Dataset, NoiseSpec,
    NoiseTargets, Split, SyntheticSpec,
};
use esnrae::rae::{encode, fit, to_envelope, AutoencoderKind, RaeTrainSpec};
use esnrae::{Error, Matrix};

#[derive(Parser)]
#[command(name = "esnrae", version, about = "Echo state network autoencoders for time-series features")]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides this.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an autoencoder on a training file and write train/test features.
    Encode(EncodeArgs),
    /// Train the linear classifier on one file and report the test error rate.
    Classify(ClassifyArgs),
    /// Run a multi-run experiment from a spec file and write CSV + Markdown reports.
    Bench(BenchArgs),
    /// Write a copy of a dataset with white Gaussian noise at a given SNR.
    Noise(NoiseArgs),
    /// Generate a synthetic sine / noisy-sine dataset pair.
    Synth(SynthArgs),
}

/// Settings shared by `encode` and `bench`. Each flag overrides the value
/// from `--config`.
#[derive(Args)]
struct ModelArgs {
    /// TOML spec file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in per-dataset reservoir settings (ecg200, coffee, ...).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n_hidden: Option<usize>,
    /// Fraction of nonzero recurrent weights.
    #[arg(long)]
    connectivity: Option<f64>,
    #[arg(long)]
    spectral_radius: Option<f64>,
    /// Reservoirs in the multi-layer kinds.
    #[arg(long)]
    ml_layers: Option<usize>,
    #[arg(long)]
    input_scaling: Option<f64>,
    #[arg(long)]
    bias_scaling: Option<f64>,
    /// Random networks tried per fit; the best reconstruction wins.
    #[arg(long)]
    n_candidates: Option<usize>,
    /// carry or reset.
    #[arg(long)]
    reset_policy: Option<String>,
    #[arg(long)]
    pinv_tolerance: Option<f64>,
    /// Base seed; run r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Do not z-score the data with training statistics.
    #[arg(long)]
    no_normalize: bool,
    /// Classifier regularisation.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    classifier_seed: Option<u64>,
}

impl ModelArgs {
    fn document(&self) -> esnrae::Result<SpecDocument> {
        let mut doc = match &self.config {
            Some(p) => SpecDocument::from_toml_file(p)?,
            None => SpecDocument::default(),
        };
        let mut top = SpecDocument {
            preset: self.preset.clone(),
            n_hidden: self.n_hidden,
            connectivity: self.connectivity,
            spectral_radius: self.spectral_radius,
            ml_layers: self.ml_layers,
            input_scaling: self.input_scaling,
            bias_scaling: self.bias_scaling,
            n_candidates: self.n_candidates,
            reset_policy: self.reset_policy.clone(),
            pinv_tolerance: self.pinv_tolerance,
            base_seed: self.seed,
            normalize: self.no_normalize.then_some(false),
            ..Default::default()
        };
        if self.lambda.is_some() || self.epochs.is_some() || self.classifier_seed.is_some() {
            top.classifier = Some(esnrae::bench::ClassifierDocument {
                lambda: self.lambda,
                epochs: self.epochs,
                seed: self.classifier_seed,
            });
        }
        doc.overlay(&top);
        Ok(doc)
    }
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// esn-rae, ml-esn-rae, elm-ae or ml-elm-ae.
    #[arg(long, default_value = "esn-rae")]
    kind: String,
    /// Output directory.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Training file in UCR format (raw patterns or encoded features).
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment spec (TOML).
    spec: PathBuf,
    /// Comma-separated methods: raw, esn-rae, ml-esn-rae, elm-ae, ml-elm-ae.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated noise levels: `clean` or an SNR in dB.
    #[arg(long, value_delimiter = ',')]
    noise_levels: Option<Vec<String>>,
    /// train, test or both.
    #[arg(long)]
    noise_targets: Option<String>,
    /// Record timings in the CSV (the CSV is then no longer reproducible byte for byte).
    #[arg(long)]
    timings: bool,
    /// Output directory for `<name>.csv` and `<name>.md`.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct NoiseArgs {
    /// Input file in UCR format.
    input: PathBuf,
    #[arg(long)]
    snr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value = "synthetic")]
    name: String,
    #[arg(long, default_value_t = 40)]
    n_train: usize,
    #[arg(long, default_value_t = 40)]
    n_test: usize,
    #[arg(long, default_value_t = 64)]
    length: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 0.3)]
    noise_std: f64,
    #[arg(long, default_value_t = 0.25)]
    phase_jitter: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Error(Error),
    Partial(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Noise(a) => cmd_noise(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial(n)) => {
            eprintln!("esnrae: {n} benchmark cells failed; see the report for details");
            ExitCode::from(4)
        }
        Err(Failure::Error(e)) => {
            eprintln!("esnrae: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}

fn echo(pairs: &[(String, String)]) {
    for (k, v) in pairs {
        println!("# {k} = {v}");
    }
}

fn create_dir(dir: &Path) -> esnrae::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

fn features_dataset(like: &Dataset, features: &Matrix) -> esnrae::Result<Dataset> {
    Dataset::new(like.name(), features.transpose(), like.labels().to_vec(), like.label_map().to_vec(), like.split())
}

fn cmd_encode(a: EncodeArgs) -> CmdResult {
    let kind: AutoencoderKind = a.kind.parse()?;
    let mut doc = a.model.document()?;
    if a.train.is_some() {
        doc.train = a.train.clone();
    }
    if a.test.is_some() {
        doc.test = a.test.clone();
    }
    doc.methods = Some(vec![kind.as_str().into()]);
    let spec = doc.resolve()?;
    let (train_path, test_path) = match &spec.data {
        esnrae::bench::DataSource::Files { train, test } => (train.clone(), test.clone()),
        esnrae::bench::DataSource::Synthetic(_) => {
            return Err(Error::Parameter("encode needs --train and --test files".into()).into())
        }
    };
    let mut pairs = vec![("kind".to_owned(), kind.as_str().to_owned())];
    pairs.extend(spec.echo().into_iter().filter(|(k, _)| {
        !matches!(k.as_str(), "methods" | "n_runs" | "noise_levels" | "noise_targets" | "csv_timings")
            && !k.starts_with("classifier.")
    }));
    echo(&pairs);

    let (train, test) = unify_labels(
        &parse_ucr(&train_path)?.with_split(Split::Train),
        &parse_ucr(&test_path)?.with_split(Split::Test),
    )?;
    let (train, test) =
        if spec.normalize { (normalize(&train, &train)?, normalize(&test, &train)?) } else { (train, test) };
    let layers = if kind.is_multilayer() { spec.ml_layers } else { 1 };
    let rae = RaeTrainSpec {
        cfg: spec.reservoir_config(train.length(), layers),
        n_candidates: spec.n_candidates,
        seed: spec.base_seed,
        reset_policy: spec.reset_policy,
        pinv_tolerance: spec.pinv_tolerance,
    };
    let model = fit(&train, &rae, kind)?;
    let test_features = encode(&model, &test)?;

    create_dir(&a.out)?;
    let stem = format!("{}.{}", spec.name, kind.as_str());
    let model_path = a.out.join(format!("{stem}.model"));
    std::fs::write(&model_path, to_envelope(&model)?).map_err(|e| Error::Io { path: model_path.clone(), source: e })?;
    let train_out = a.out.join(format!("{stem}_TRAIN.tsv"));
    let test_out = a.out.join(format!("{stem}_TEST.tsv"));
    write_ucr(&train_out, &features_dataset(&train, &model.features_train)?)?;
    write_ucr(&test_out, &features_dataset(&test, &test_features)?)?;

    println!("chosen candidate: {} of {}", model.chosen_candidate, rae.n_candidates);
    println!("reconstruction error (before tying): {:e}", model.pre_tying_error);
    println!("reconstruction error: {:e}", model.reconstruction_error);
    println!(
        "features: train {}x{}, test {}x{}",
        model.features_train.nrows(),
        model.features_train.ncols(),
        test_features.nrows(),
        test_features.ncols()
    );
    println!("wrote {}", model_path.display());
    println!("wrote {}", train_out.display());
    println!("wrote {}", test_out.display());
    Ok(())
}

fn cmd_classify(a: ClassifyArgs) -> CmdResult {
    let d = ClassifierParams::default();
    let params = ClassifierParams {
        lambda: a.lambda.unwrap_or(d.lambda),
        epochs: a.epochs.unwrap_or(d.epochs),
        seed: a.seed.unwrap_or(d.seed),
    };
    echo(&[
        ("train".into(), a.train.display().to_string()),
        ("test".into(), a.test.display().to_string()),
        ("lambda".into(), params.lambda.to_string()),
        ("epochs".into(), params.epochs.to_string()),
        ("seed".into(), params.seed.to_string()),
    ]);
    let (train, test) =
        unify_labels(&parse_ucr(&a.train)?.with_split(Split::Train), &parse_ucr(&a.test)?.with_split(Split::Test))?;
    if train.length() != test.length() {
        return Err(Error::Shape {
            context: "train/test pattern length",
            expected: train.length().to_string(),
            got: test.length().to_string(),
        }
        .into());
    }
    let clf = train_classifier(&train.patterns().transpose(), train.labels(), &params)?;
    let r = evaluate(&clf, &test.patterns().transpose(), test.labels())?;
    println!("error rate: {} ({} of {} misclassified)", r.error_rate, r.misclassified, r.total);
    println!("confusion (rows true, columns predicted; labels {:?}):", train.label_map());
    for row in &r.confusion {
        println!("  {}", row.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "));
    }
    Ok(())
}

fn level_value(s: &str) -> LevelValue {
    match s.trim().parse::<f64>() {
        Ok(v) => LevelValue::Float(v),
        Err(_) => LevelValue::Text(s.trim().to_owned()),
    }
}

fn bench_spec(mut a: BenchArgs) -> esnrae::Result<ExperimentSpec> {
    if a.model.config.is_some() {
        return Err(Error::Parameter("bench takes the spec as its argument; --config is not used here".into()));
    }
    a.model.config = Some(a.spec.clone());
    let mut doc = a.model.document()?;
    let top = SpecDocument {
        methods: a.methods,
        n_runs: a.runs,
        noise_levels: a.noise_levels.map(|ls| ls.iter().map(|s| level_value(s)).collect()),
        noise_targets: a.noise_targets,
        csv_timings: a.timings.then_some(true),
        ..Default::default()
    };
    doc.overlay(&top);
    doc.resolve()
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let out = a.out.clone();
    let spec = bench_spec(a)?;
    echo(&spec.echo());
    let report = run_experiment(&spec)?;

    create_dir(&out)?;
    let csv = out.join(format!("{}.csv", spec.name));
    let md = out.join(format!("{}.md", spec.name));
    emit_report(&report, ReportFormat::Csv, &csv)?;
    emit_report(&report, ReportFormat::Markdown, &md)?;
    println!();
    print!("{}", to_markdown(&report).split_once("```\n\n").map_or("", |(_, rest)| rest));
    println!();
    println!("wrote {}", csv.display());
    println!("wrote {}", md.display());
    match report.failures() {
        0 => Ok(()),
        n => Err(Failure::Partial(n)),
    }
}

fn cmd_noise(a: NoiseArgs) -> CmdResult {
    let d = parse_ucr(&a.input)?;
    let spec = NoiseSpec { snr_db: a.snr, seed: a.seed, targets: NoiseTargets::Both };
    echo(&[
        ("input".into(), a.input.display().to_string()),
        ("split".into(), d.split().as_str().into()),
        ("snr_db".into(), a.snr.to_string()),
        ("seed".into(), a.seed.to_string()),
        ("out".into(), a.out.display().to_string()),
    ]);
    let noisy = inject_noise(&d, &spec)?;
    write_ucr(&a.out, &noisy)?;
    println!("measured SNR: {:.3} dB", measured_snr(&d, &noisy)?);
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> CmdResult {
    let spec = SyntheticSpec {
        name: a.name.clone(),
        n_train: a.n_train,
        n_test: a.n_test,
        length: a.length,
        n_classes: a.classes,
        noise_std: a.noise_std,
        phase_jitter: a.phase_jitter,
        seed: a.seed,
    };
    echo(&[
        ("name".into(), spec.name.clone()),
        ("n_train".into(), spec.n_train.to_string()),
        ("n_test".into(), spec.n_test.to_string()),
        ("length".into(), spec.length.to_string()),
        ("classes".into(), spec.n_classes.to_string()),
        ("noise_std".into(), spec.noise_std.to_string()),
        ("phase_jitter".into(), spec.phase_jitter.to_string()),
        ("seed".into(), spec.seed.to_string()),
    ]);
    let (train, test) = synthetic(&spec)?;
    create_dir(&a.out)?;
    for (d, split) in [(&train, "TRAIN"), (&test, "TEST")] {
        let path = a.out.join(format!("{}_{split}.tsv", spec.name));
        write_ucr(&path, d)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
