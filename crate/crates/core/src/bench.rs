//! Multi-run encode → classify experiments over noise levels, with CSV and
//! Markdown reports.
//!
//! Every cell is one (noise level, run, method) job. Run `r` uses seed
//! `base_seed + r` for the noise draw and the autoencoder, so any single run
//! can be replayed alone. Noise is added before normalisation and the
//! normalisation statistics come from the (noisy) training split.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{evaluate, train_classifier, ClassifierParams};
use crate::dataio::{
    inject_noise, normalize, parse_ucr, synthetic, unify_labels, Dataset, NoiseSpec, NoiseTargets, Split, SyntheticSpec,
};
use crate::presets::{self, ML_LAYERS};
use crate::rae::{encode, fit, AutoencoderKind, RaeTrainSpec};
use crate::reservoir::{ReservoirConfig, ResetPolicy};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Classifier on the normalised input patterns.
    Raw,
    Rae(AutoencoderKind),
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Raw,
        Method::Rae(AutoencoderKind::EsnRae),
        Method::Rae(AutoencoderKind::MlEsnRae),
        Method::Rae(AutoencoderKind::ElmAe),
        Method::Rae(AutoencoderKind::MlElmAe),
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Raw => "raw",
            Method::Rae(k) => k.as_str(),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "raw" {
            return Ok(Method::Raw);
        }
        s.parse::<AutoencoderKind>().map(Method::Rae).map_err(|_| {
            Error::Parameter(format!("unknown method `{s}` (expected raw, esn-rae, ml-esn-rae, elm-ae or ml-elm-ae)"))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    Clean,
    SnrDb(f64),
}

impl NoiseLevel {
    /// Value of the `snr_db` CSV column: empty when clean.
    pub fn csv_value(self) -> String {
        match self {
            NoiseLevel::Clean => String::new(),
            NoiseLevel::SnrDb(v) => v.to_string(),
        }
    }

    pub fn label(self) -> String {
        match self {
            NoiseLevel::Clean => "noise free".into(),
            NoiseLevel::SnrDb(v) => format!("SNR={v} dB"),
        }
    }
}

impl std::fmt::Display for NoiseLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseLevel::Clean => f.write_str("clean"),
            NoiseLevel::SnrDb(v) => write!(f, "{v}"),
        }
    }
}

impl std::str::FromStr for NoiseLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("clean") {
            return Ok(NoiseLevel::Clean);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(NoiseLevel::SnrDb(v)),
            _ => Err(Error::Parameter(format!("noise level `{s}` is neither `clean` nor a finite SNR in dB"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files { train: PathBuf, test: PathBuf },
    Synthetic(SyntheticSpec),
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub data: DataSource,
    /// Preset the reservoir sizes came from, if any.
    pub preset: Option<String>,
    pub n_hidden: usize,
    pub connectivity: f64,
    pub spectral_radius: f64,
    /// Reservoirs in the multi-layer kinds.
    pub ml_layers: usize,
    pub input_scaling: f64,
    pub bias_scaling: f64,
    pub n_candidates: usize,
    pub reset_policy: ResetPolicy,
    pub pinv_tolerance: Option<f64>,
    pub methods: Vec<Method>,
    pub n_runs: usize,
    pub base_seed: u64,
    pub noise_levels: Vec<NoiseLevel>,
    pub noise_targets: NoiseTargets,
    pub normalize: bool,
    pub classifier: ClassifierParams,
    /// Write measured timings into the CSV. Off by default so that replaying
    /// a spec reproduces the CSV byte for byte.
    pub csv_timings: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Parameter("n_runs must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Parameter("no methods given".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::Parameter(format!("method `{m}` listed twice")));
            }
        }
        if self.noise_levels.is_empty() {
            return Err(Error::Parameter("no noise levels given".into()));
        }
        for (i, l) in self.noise_levels.iter().enumerate() {
            if let NoiseLevel::SnrDb(v) = l {
                if !v.is_finite() {
                    return Err(Error::Parameter(format!("noise level {v} is not finite")));
                }
            }
            if self.noise_levels[..i].contains(l) {
                return Err(Error::Parameter(format!("noise level `{l}` listed twice")));
            }
        }
        if self.n_candidates == 0 {
            return Err(Error::Parameter("n_candidates must be >= 1".into()));
        }
        if self.ml_layers < 2 {
            return Err(Error::Parameter(format!("ml_layers must be >= 2, got {}", self.ml_layers)));
        }
        self.reservoir_config(1, 1).validate()?;
        Ok(())
    }

    pub fn reservoir_config(&self, input_dim: usize, n_layers: usize) -> ReservoirConfig {
        ReservoirConfig {
            n_hidden: self.n_hidden,
            connectivity: self.connectivity,
            spectral_radius: self.spectral_radius,
            n_layers,
            input_dim,
            input_scaling: self.input_scaling,
            bias_scaling: self.bias_scaling,
        }
    }

    /// Resolved configuration as ordered `key = value` pairs.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut e: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| e.push((k.to_owned(), v));
        put("name", self.name.clone());
        match &self.data {
            DataSource::Files { train, test } => {
                put("train", train.display().to_string());
                put("test", test.display().to_string());
            }
            DataSource::Synthetic(s) => {
                put(
                    "synthetic",
                    format!(
                        "n_train={} n_test={} length={} n_classes={} noise_std={} phase_jitter={} seed={}",
                        s.n_train, s.n_test, s.length, s.n_classes, s.noise_std, s.phase_jitter, s.seed
                    ),
                );
            }
        }
        put("preset", self.preset.clone().unwrap_or_else(|| "none".into()));
        put("n_hidden", self.n_hidden.to_string());
        put("connectivity", self.connectivity.to_string());
        put("spectral_radius", self.spectral_radius.to_string());
        put("ml_layers", self.ml_layers.to_string());
        put("input_scaling", self.input_scaling.to_string());
        put("bias_scaling", self.bias_scaling.to_string());
        put("n_candidates", self.n_candidates.to_string());
        put("reset_policy", self.reset_policy.as_str().into());
        put("pinv_tolerance", self.pinv_tolerance.map_or_else(|| "default".into(), |v| v.to_string()));
        put("methods", self.methods.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(","));
        put("n_runs", self.n_runs.to_string());
        put("base_seed", self.base_seed.to_string());
        put("noise_levels", self.noise_levels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(","));
        put(
            "noise_targets",
            match self.noise_targets {
                NoiseTargets::Train => "train",
                NoiseTargets::Test => "test",
                NoiseTargets::Both => "both",
            }
            .into(),
        );
        put("normalize", self.normalize.to_string());
        put("classifier.lambda", self.classifier.lambda.to_string());
        put("classifier.epochs", self.classifier.epochs.to_string());
        put("classifier.seed", self.classifier.seed.to_string());
        put("csv_timings", self.csv_timings.to_string());
        e
    }
}

/// One noise level in a spec file: `"clean"` or a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl LevelValue {
    fn resolve(&self) -> Result<NoiseLevel> {
        match self {
            LevelValue::Int(v) => Ok(NoiseLevel::SnrDb(*v as f64)),
            LevelValue::Float(v) if v.is_finite() => Ok(NoiseLevel::SnrDb(*v)),
            LevelValue::Float(v) => Err(Error::Parameter(format!("noise level {v} is not finite"))),
            LevelValue::Text(s) => s.parse(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDocument {
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub length: Option<usize>,
    pub n_classes: Option<usize>,
    pub noise_std: Option<f64>,
    pub phase_jitter: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierDocument {
    pub lambda: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
}

/// Experiment spec as written in a TOML file; every field is optional and
/// unset fields take defaults in [`SpecDocument::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub name: Option<String>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub synthetic: Option<SyntheticDocument>,
    pub preset: Option<String>,
    pub n_hidden: Option<usize>,
    pub connectivity: Option<f64>,
    pub spectral_radius: Option<f64>,
    pub ml_layers: Option<usize>,
    pub input_scaling: Option<f64>,
    pub bias_scaling: Option<f64>,
    pub n_candidates: Option<usize>,
    pub reset_policy: Option<String>,
    pub pinv_tolerance: Option<f64>,
    pub methods: Option<Vec<String>>,
    pub n_runs: Option<usize>,
    pub base_seed: Option<u64>,
    pub noise_levels: Option<Vec<LevelValue>>,
    pub noise_targets: Option<String>,
    pub normalize: Option<bool>,
    pub csv_timings: Option<bool>,
    pub classifier: Option<ClassifierDocument>,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl SpecDocument {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text)
            .map_err(|e| Error::Format { line: None, message: format!("experiment spec: {}", e.message()) })
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut doc = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut doc.train, &mut doc.test].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(doc)
    }

    /// Fields set in `top` replace the ones in `self`.
    pub fn overlay(&mut self, top: &SpecDocument) {
        overlay!(
            self,
            top,
            name,
            train,
            test,
            synthetic,
            preset,
            n_hidden,
            connectivity,
            spectral_radius,
            ml_layers,
            input_scaling,
            bias_scaling,
            n_candidates,
            reset_policy,
            pinv_tolerance,
            methods,
            n_runs,
            base_seed,
            noise_levels,
            noise_targets,
            normalize,
            csv_timings
        );
        if let Some(c) = &top.classifier {
            let dst = self.classifier.get_or_insert_with(Default::default);
            overlay!(dst, c, lambda, epochs, seed);
        }
    }

    pub fn resolve(&self) -> Result<ExperimentSpec> {
        let data = match (&self.train, &self.test, &self.synthetic) {
            (Some(train), Some(test), None) => DataSource::Files { train: train.clone(), test: test.clone() },
            (None, None, Some(s)) => {
                let d = SyntheticSpec::default();
                DataSource::Synthetic(SyntheticSpec {
                    name: self.name.clone().unwrap_or(d.name),
                    n_train: s.n_train.unwrap_or(d.n_train),
                    n_test: s.n_test.unwrap_or(d.n_test),
                    length: s.length.unwrap_or(d.length),
                    n_classes: s.n_classes.unwrap_or(d.n_classes),
                    noise_std: s.noise_std.unwrap_or(d.noise_std),
                    phase_jitter: s.phase_jitter.unwrap_or(d.phase_jitter),
                    seed: s.seed.unwrap_or(d.seed),
                })
            }
            (None, None, None) => {
                return Err(Error::Parameter(
                    "spec needs either `train` and `test` paths or a [synthetic] section".into(),
                ))
            }
            (_, _, Some(_)) => {
                return Err(Error::Parameter("spec gives both data files and a [synthetic] section".into()))
            }
            _ => return Err(Error::Parameter("spec needs both `train` and `test`".into())),
        };
        let name = match (&self.name, &data) {
            (Some(n), _) => n.clone(),
            (None, DataSource::Files { train, .. }) => {
                let stem = train.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                stem.strip_suffix("_TRAIN").unwrap_or(&stem).to_owned()
            }
            (None, DataSource::Synthetic(s)) => s.name.clone(),
        };

        let preset = match &self.preset {
            Some(p) => Some(presets::lookup(p).ok_or_else(|| Error::Parameter(format!("unknown preset `{p}`")))?),
            None => presets::lookup(&name),
        };
        let n_hidden = self
            .n_hidden
            .or(preset.map(|p| p.n_hidden))
            .ok_or_else(|| Error::Parameter(format!("no preset for `{name}`: set n_hidden and connectivity")))?;
        let connectivity = self
            .connectivity
            .or(preset.map(|p| p.connectivity))
            .ok_or_else(|| Error::Parameter(format!("no preset for `{name}`: set n_hidden and connectivity")))?;

        let methods = match &self.methods {
            Some(ms) => ms.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?,
            None => Method::ALL.to_vec(),
        };
        let noise_levels = match &self.noise_levels {
            Some(ls) => ls.iter().map(LevelValue::resolve).collect::<Result<Vec<_>>>()?,
            None => vec![NoiseLevel::Clean],
        };
        let noise_targets = match self.noise_targets.as_deref() {
            None | Some("both") => NoiseTargets::Both,
            Some("train") => NoiseTargets::Train,
            Some("test") => NoiseTargets::Test,
            Some(other) => {
                return Err(Error::Parameter(format!("unknown noise_targets `{other}` (expected train, test or both)")))
            }
        };
        let reset_policy = match &self.reset_policy {
            Some(s) => s.parse()?,
            None => ResetPolicy::Carry,
        };
        let cd = self.classifier.clone().unwrap_or_default();
        let cdef = ClassifierParams::default();

        let spec = ExperimentSpec {
            name,
            data,
            preset: preset.map(|p| p.key.to_owned()),
            n_hidden,
            connectivity,
            spectral_radius: self.spectral_radius.unwrap_or(0.9),
            ml_layers: self.ml_layers.unwrap_or(ML_LAYERS),
            input_scaling: self.input_scaling.unwrap_or(1.0),
            bias_scaling: self.bias_scaling.unwrap_or(1.0),
            n_candidates: self.n_candidates.unwrap_or(10),
            reset_policy,
            pinv_tolerance: self.pinv_tolerance,
            methods,
            n_runs: self.n_runs.unwrap_or(10),
            base_seed: self.base_seed.unwrap_or(0),
            noise_levels,
            noise_targets,
            normalize: self.normalize.unwrap_or(true),
            classifier: ClassifierParams {
                lambda: cd.lambda.unwrap_or(cdef.lambda),
                epochs: cd.epochs.unwrap_or(cdef.epochs),
                seed: cd.seed.unwrap_or(cdef.seed),
            },
            csv_timings: self.csv_timings.unwrap_or(false),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses and resolves a TOML experiment spec.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    SpecDocument::from_toml_str(text)?.resolve()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub fit_ms: Option<f64>,
    pub encode_ms: Option<f64>,
    pub classify_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub er: f64,
    /// Final reconstruction error of the autoencoder; `None` for raw.
    pub recon_error: Option<f64>,
    pub timings: PhaseTimings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: Method,
    pub level: NoiseLevel,
    pub run: usize,
    pub seed: u64,
    /// `Err` holds the message of the stage that failed.
    pub outcome: std::result::Result<RunOutcome, String>,
}

/// Per-run error rates of one (method, level) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub ers: Vec<f64>,
    pub failures: usize,
}

impl CellSummary {
    /// `None` when any run failed: an incomplete cell has no mean.
    pub fn mean(&self) -> Option<f64> {
        (self.failures == 0 && !self.ers.is_empty()).then(|| self.ers.iter().sum::<f64>() / self.ers.len() as f64)
    }

    /// Population standard deviation of the valid runs.
    pub fn std(&self) -> Option<f64> {
        if self.ers.is_empty() {
            return None;
        }
        let n = self.ers.len() as f64;
        let m = self.ers.iter().sum::<f64>() / n;
        Some((self.ers.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / n).sqrt())
    }

    pub fn min(&self) -> Option<f64> {
        self.ers.iter().copied().reduce(f64::min)
    }

    pub fn max(&self) -> Option<f64> {
        self.ers.iter().copied().reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub dataset: String,
    pub echo: Vec<(String, String)>,
    pub methods: Vec<Method>,
    pub levels: Vec<NoiseLevel>,
    pub n_runs: usize,
    /// Ordered by level, then method, then run.
    pub records: Vec<RunRecord>,
    pub csv_timings: bool,
}

impl ExperimentReport {
    pub fn cell(&self, method: Method, level: NoiseLevel) -> CellSummary {
        let mut s = CellSummary { ers: Vec::new(), failures: 0 };
        for r in self.records.iter().filter(|r| r.method == method && r.level == level) {
            match &r.outcome {
                Ok(o) => s.ers.push(o.er),
                Err(_) => s.failures += 1,
            }
        }
        s
    }

    pub fn mean_er(&self, method: Method, level: NoiseLevel) -> Option<f64> {
        self.cell(method, level).mean()
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.outcome.is_err()).count()
    }
}

fn load_data(spec: &ExperimentSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = match &spec.data {
        DataSource::Files { train, test } => {
            let a = parse_ucr(train)?.with_split(Split::Train);
            let b = parse_ucr(test)?.with_split(Split::Test);
            if a.length() != b.length() {
                return Err(Error::shape("train/test pattern length", a.length(), b.length()));
            }
            unify_labels(&a, &b)?
        }
        DataSource::Synthetic(s) => synthetic(s)?,
    };
    if train.n_classes() < 2 {
        return Err(Error::Parameter(format!("`{}` has fewer than 2 classes", spec.name)));
    }
    Ok((train, test))
}

/// Noise then normalisation, as fed to every method of one (level, run).
fn prepare(
    spec: &ExperimentSpec,
    train: &Dataset,
    test: &Dataset,
    level: NoiseLevel,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (mut tr, mut te) = (train.clone(), test.clone());
    if let NoiseLevel::SnrDb(snr) = level {
        let ns = NoiseSpec { snr_db: snr, seed, targets: spec.noise_targets };
        tr = inject_noise(&tr, &ns)?;
        te = inject_noise(&te, &ns)?;
    }
    if spec.normalize {
        te = normalize(&te, &tr)?;
        tr = normalize(&tr, &tr)?;
    }
    Ok((tr, te))
}

fn ms(t: Instant) -> Option<f64> {
    Some(t.elapsed().as_secs_f64() * 1e3)
}

fn run_cell(
    spec: &ExperimentSpec,
    train: &Dataset,
    test: &Dataset,
    level: NoiseLevel,
    seed: u64,
    method: Method,
) -> Result<RunOutcome> {
    let (tr, te) = prepare(spec, train, test, level, seed)?;
    let mut timings = PhaseTimings::default();
    let (train_x, test_x, recon_error) = match method {
        Method::Raw => (tr.patterns().transpose(), te.patterns().transpose(), None),
        Method::Rae(kind) => {
            let layers = if kind.is_multilayer() { spec.ml_layers } else { 1 };
            let rae = RaeTrainSpec {
                cfg: spec.reservoir_config(tr.length(), layers),
                n_candidates: spec.n_candidates,
                seed,
                reset_policy: spec.reset_policy,
                pinv_tolerance: spec.pinv_tolerance,
            };
            let t0 = Instant::now();
            let model = fit(&tr, &rae, kind)?;
            timings.fit_ms = ms(t0);
            let t0 = Instant::now();
            let test_x = encode(&model, &te)?;
            timings.encode_ms = ms(t0);
            let recon = model.reconstruction_error;
            (model.features_train, test_x, Some(recon))
        }
    };
    let t0 = Instant::now();
    let clf = train_classifier(&train_x, tr.labels(), &spec.classifier)?;
    let result = evaluate(&clf, &test_x, te.labels())?;
    timings.classify_ms = ms(t0);
    Ok(RunOutcome { er: result.error_rate, recon_error, timings })
}

/// Runs every (level, run, method) cell. Data loading and spec errors abort;
/// a failing cell is recorded with its error message and the rest go on.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let (train, test) = load_data(spec)?;

    let mut jobs = Vec::new();
    for (li, &level) in spec.noise_levels.iter().enumerate() {
        for (mi, &method) in spec.methods.iter().enumerate() {
            for run in 0..spec.n_runs {
                jobs.push((li, mi, run, level, method));
            }
        }
    }
    let mut done: Vec<((usize, usize, usize), RunRecord)> = jobs
        .into_par_iter()
        .map(|(li, mi, run, level, method)| {
            let seed = spec.base_seed.wrapping_add(run as u64);
            let outcome = run_cell(spec, &train, &test, level, seed, method).map_err(|e| {
                log::warn!("{method} at {level} run {run}: {e}");
                e.to_string()
            });
            ((li, mi, run), RunRecord { method, level, run, seed, outcome })
        })
        .collect();
    done.sort_by_key(|(k, _)| *k);

    Ok(ExperimentReport {
        dataset: spec.name.clone(),
        echo: spec.echo(),
        methods: spec.methods.clone(),
        levels: spec.noise_levels.clone(),
        n_runs: spec.n_runs,
        records: done.into_iter().map(|(_, r)| r).collect(),
        csv_timings: spec.csv_timings,
    })
}

/// Error-rate ratios in percent; `None` where the denominator is zero or a
/// cell has no mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratios {
    /// ER(ml-esn-rae) / ER(esn-rae).
    pub p1: Option<f64>,
    /// ER(ml-esn-rae) / ER(ml-elm-ae).
    pub p2: Option<f64>,
    /// ER(esn-rae) / ER(elm-ae).
    pub p3: Option<f64>,
}

fn percent(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    match (num, den) {
        (Some(n), Some(d)) if d != 0.0 => Some(100.0 * n / d),
        _ => None,
    }
}

/// Ratios from the four mean error rates.
pub fn ratios(esn: Option<f64>, ml_esn: Option<f64>, elm: Option<f64>, ml_elm: Option<f64>) -> Ratios {
    Ratios { p1: percent(ml_esn, esn), p2: percent(ml_esn, ml_elm), p3: percent(esn, elm) }
}

/// [`Ratios`] for every noise level of `report`, which must contain all four
/// autoencoder kinds.
pub fn ratio_table(report: &ExperimentReport) -> Result<Vec<(NoiseLevel, Ratios)>> {
    for kind in AutoencoderKind::ALL {
        if !report.methods.contains(&Method::Rae(kind)) {
            return Err(Error::MissingMethod(kind.as_str().into()));
        }
    }
    Ok(report
        .levels
        .iter()
        .map(|&level| {
            let m = |k| report.mean_er(Method::Rae(k), level);
            (
                level,
                ratios(
                    m(AutoencoderKind::EsnRae),
                    m(AutoencoderKind::MlEsnRae),
                    m(AutoencoderKind::ElmAe),
                    m(AutoencoderKind::MlElmAe),
                ),
            )
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

pub const CSV_HEADER: [&str; 11] =
    ["dataset", "method", "snr_db", "run", "seed", "er", "recon_error", "fit_ms", "encode_ms", "classify_ms", "error"];

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

/// Long-format CSV, one row per run, preceded by `#` lines echoing the
/// configuration. Floats use the shortest representation that parses back
/// to the same value.
pub fn to_csv(report: &ExperimentReport) -> String {
    let mut out = String::new();
    for (k, v) in &report.echo {
        writeln!(out, "# {k} = {}", one_line(v)).unwrap();
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("write to memory");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let timing = |v: Option<f64>| if report.csv_timings { opt(v) } else { String::new() };
    for r in &report.records {
        let (er, recon, t, err) = match &r.outcome {
            Ok(o) => (o.er.to_string(), opt(o.recon_error), o.timings, String::new()),
            Err(e) => (String::new(), String::new(), PhaseTimings::default(), one_line(e)),
        };
        w.write_record([
            report.dataset.clone(),
            r.method.to_string(),
            r.level.csv_value(),
            r.run.to_string(),
            r.seed.to_string(),
            er,
            recon,
            timing(t.fit_ms),
            timing(t.encode_ms),
            timing(t.classify_ms),
            err,
        ])
        .expect("write to memory");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is UTF-8"));
    out
}

/// One data row of a report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub dataset: String,
    pub method: Method,
    pub level: NoiseLevel,
    pub run: usize,
    pub seed: u64,
    pub er: Option<f64>,
    pub recon_error: Option<f64>,
    pub fit_ms: Option<f64>,
    pub encode_ms: Option<f64>,
    pub classify_ms: Option<f64>,
    pub error: Option<String>,
}

/// Reads back the rows written by [`to_csv`]; `#` lines are skipped.
pub fn parse_report_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).flexible(false).from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| Error::format(None, format!("report csv header: {e}")))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::format(None, "report csv header does not match the expected columns"));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::format(None, format!("report csv: {e}")))?;
        let line = rec.position().map(|p| p.line() as usize);
        let bad = |what: &str, v: &str| Error::format(line, format!("bad {what} `{v}`"));
        let opt = |i: usize, what: &str| -> Result<Option<f64>> {
            let v = &rec[i];
            if v.is_empty() {
                Ok(None)
            } else {
                v.parse().map(Some).map_err(|_| bad(what, v))
            }
        };
        let level = if rec[2].is_empty() {
            NoiseLevel::Clean
        } else {
            match rec[2].parse::<f64>() {
                Ok(v) if v.is_finite() => NoiseLevel::SnrDb(v),
                _ => return Err(bad("snr_db", &rec[2])),
            }
        };
        rows.push(CsvRow {
            dataset: rec[0].to_owned(),
            method: rec[1].parse().map_err(|_| bad("method", &rec[1]))?,
            level,
            run: rec[3].parse().map_err(|_| bad("run", &rec[3]))?,
            seed: rec[4].parse().map_err(|_| bad("seed", &rec[4]))?,
            er: opt(5, "er")?,
            recon_error: opt(6, "recon_error")?,
            fit_ms: opt(7, "fit_ms")?,
            encode_ms: opt(8, "encode_ms")?,
            classify_ms: opt(9, "classify_ms")?,
            error: (!rec[10].is_empty()).then(|| rec[10].to_owned()),
        });
    }
    Ok(rows)
}

fn fmt3(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.3}"))
}

fn fmt2(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x:.2}"))
}

/// Markdown summary: error rate per method, a level x method table, the
/// ratio table when all four autoencoders ran, and per-cell spread.
pub fn to_markdown(report: &ExperimentReport) -> String {
    let mut s = String::new();
    writeln!(s, "# {} ({} runs)\n", report.dataset, report.n_runs).unwrap();
    writeln!(s, "```").unwrap();
    for (k, v) in &report.echo {
        writeln!(s, "{k} = {}", one_line(v)).unwrap();
    }
    writeln!(s, "```\n").unwrap();

    let first = report.levels[0];
    writeln!(s, "## Mean error rate, {}\n", first.label()).unwrap();
    writeln!(s, "| Method | ER |\n|---|---|").unwrap();
    for &m in &report.methods {
        writeln!(s, "| {m} | {} |", fmt3(report.mean_er(m, first))).unwrap();
    }

    writeln!(s, "\n## Mean error rate by noise level\n").unwrap();
    write!(s, "| Dataset | Noise |").unwrap();
    for m in &report.methods {
        write!(s, " {m} |").unwrap();
    }
    write!(s, "\n|---|---|").unwrap();
    for _ in &report.methods {
        write!(s, "---|").unwrap();
    }
    s.push('\n');
    for (i, &level) in report.levels.iter().enumerate() {
        let name = if i == 0 { report.dataset.as_str() } else { "" };
        write!(s, "| {name} | {} |", level.label()).unwrap();
        for &m in &report.methods {
            write!(s, " {} |", fmt3(report.mean_er(m, level))).unwrap();
        }
        s.push('\n');
    }

    if let Ok(table) = ratio_table(report) {
        writeln!(s, "\n## ER ratios (%)\n").unwrap();
        writeln!(s, "| Dataset | Noise | P1 (%) | P2 (%) | P3 (%) |\n|---|---|---|---|---|").unwrap();
        for (i, (level, r)) in table.iter().enumerate() {
            let name = if i == 0 { report.dataset.as_str() } else { "" };
            writeln!(s, "| {name} | {} | {} | {} | {} |", level.label(), fmt2(r.p1), fmt2(r.p2), fmt2(r.p3)).unwrap();
        }
    }

    writeln!(s, "\n## Spread over runs\n").unwrap();
    writeln!(s, "| Method | Noise | mean | std | min | max | valid | failed |\n|---|---|---|---|---|---|---|---|")
        .unwrap();
    for &level in &report.levels {
        for &m in &report.methods {
            let c = report.cell(m, level);
            writeln!(
                s,
                "| {m} | {} | {} | {} | {} | {} | {} | {} |",
                level.label(),
                fmt3(c.mean()),
                fmt3(c.std()),
                fmt3(c.min()),
                fmt3(c.max()),
                c.ers.len(),
                c.failures
            )
            .unwrap();
        }
    }

    let failed: BTreeMap<String, &str> = report
        .records
        .iter()
        .filter_map(|r| {
            r.outcome.as_ref().err().map(|e| (format!("{} at {} run {}", r.method, r.level, r.run), e.as_str()))
        })
        .collect();
    if !failed.is_empty() {
        writeln!(s, "\n## Invalid cells\n").unwrap();
        for (k, e) in failed {
            writeln!(s, "- {k}: {}", one_line(e)).unwrap();
        }
    }
    s
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Csv => to_csv(report),
        ReportFormat::Markdown => to_markdown(report),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
