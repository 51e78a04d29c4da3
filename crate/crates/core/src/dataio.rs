//! UCR-style dataset loading, z-score normalisation and Gaussian noise at a
//! target SNR.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::numerics::{Matrix, SeededRng};
use crate::{Error, Result};

/// Noise at or above this SNR is indistinguishable from none in f64.
pub const CLEAN_SNR_DB: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Labelled patterns, one pattern per row (`p x K`).
///
/// Class ids are `0..C`; `label_map[id]` is the label as it appeared in the
/// source file. The map is sorted ascending, so two files with the same label
/// set get the same ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    patterns: Matrix,
    labels: Vec<usize>,
    label_map: Vec<i64>,
    split: Split,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        patterns: Matrix,
        labels: Vec<usize>,
        label_map: Vec<i64>,
        split: Split,
    ) -> Result<Self> {
        if patterns.nrows() == 0 || patterns.ncols() == 0 {
            return Err(Error::shape(
                "Dataset::new",
                "at least one pattern of length >= 1",
                format!("{}x{}", patterns.nrows(), patterns.ncols()),
            ));
        }
        if labels.len() != patterns.nrows() {
            return Err(Error::shape("Dataset::new", patterns.nrows(), format!("{} labels", labels.len())));
        }
        if label_map.is_empty() || label_map.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter("label map must be non-empty and strictly increasing".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= label_map.len()) {
            return Err(Error::Parameter(format!("class id {bad} outside label map of {} classes", label_map.len())));
        }
        if patterns.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("patterns contain NaN or infinite values".into()));
        }
        Ok(Self { name: name.into(), patterns, labels, label_map, split })
    }

    /// Builds a dataset from raw source labels, assigning ids in ascending
    /// label order.
    pub fn from_raw_labels(name: impl Into<String>, patterns: Matrix, raw: &[i64], split: Split) -> Result<Self> {
        let label_map: Vec<i64> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let labels = raw.iter().map(|l| label_map.binary_search(l).expect("label present in its own map")).collect();
        Self::new(name, patterns, labels, label_map, split)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `p x K`, one pattern per row.
    pub fn patterns(&self) -> &Matrix {
        &self.patterns
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_map(&self) -> &[i64] {
        &self.label_map
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn n_patterns(&self) -> usize {
        self.patterns.nrows()
    }

    /// Pattern length K.
    pub fn length(&self) -> usize {
        self.patterns.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.label_map.len()
    }

    pub fn original_label(&self, class: usize) -> Option<i64> {
        self.label_map.get(class).copied()
    }

    /// Same labels and metadata with replaced pattern values.
    pub fn with_patterns(&self, patterns: Matrix) -> Result<Self> {
        if patterns.shape() != self.patterns.shape() {
            return Err(Error::shape(
                "Dataset::with_patterns",
                format!("{}x{}", self.n_patterns(), self.length()),
                format!("{}x{}", patterns.nrows(), patterns.ncols()),
            ));
        }
        Self::new(self.name.clone(), patterns, self.labels.clone(), self.label_map.clone(), self.split)
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    /// Patterns `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let k = self.length();
        let mut patterns = Matrix::zeros(indices.len(), k);
        let mut labels = Vec::with_capacity(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            if i >= self.n_patterns() {
                return Err(Error::Parameter(format!("pattern index {i} out of range")));
            }
            patterns.row_mut(row).copy_from(&self.patterns.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(self.name.clone(), patterns, labels, self.label_map.clone(), self.split)
    }

    /// Re-expresses the labels against `label_map`, which must contain every
    /// original label of this dataset.
    pub fn relabel(&self, label_map: &[i64]) -> Result<Self> {
        let labels = self
            .labels
            .iter()
            .map(|&id| {
                let raw = self.label_map[id];
                label_map
                    .binary_search(&raw)
                    .map_err(|_| Error::Parameter(format!("label {raw} missing from target label map")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.name.clone(), self.patterns.clone(), labels, label_map.to_vec(), self.split)
    }
}

/// Gives a train/test pair one shared label map (the union of both).
pub fn unify_labels(a: &Dataset, b: &Dataset) -> Result<(Dataset, Dataset)> {
    let union: Vec<i64> =
        a.label_map.iter().chain(&b.label_map).copied().collect::<BTreeSet<_>>().into_iter().collect();
    Ok((a.relabel(&union)?, b.relabel(&union)?))
}

/// Reads a UCR file. The split comes from the file name (`*TEST*` is test,
/// anything else train) and the dataset name from the stem without its
/// `_TRAIN`/`_TEST` suffix.
pub fn parse_ucr(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let split = if stem.to_ascii_uppercase().contains("TEST") { Split::Test } else { Split::Train };
    let name = ["_TRAIN", "_TEST", "_train", "_test"]
        .iter()
        .find_map(|suffix| stem.strip_suffix(suffix))
        .unwrap_or(&stem)
        .to_owned();
    parse_ucr_str(&text, &name, split)
}

/// Parses UCR text: one pattern per line, class label first. Fields are
/// comma separated if the line has a comma, otherwise whitespace separated.
/// Blank lines are skipped.
pub fn parse_ucr_str(text: &str, name: &str, split: Split) -> Result<Dataset> {
    let mut raw_labels = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut k = None;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields: Box<dyn Iterator<Item = &str>> = if line.contains(',') {
            Box::new(line.split(',').map(str::trim))
        } else {
            Box::new(line.split_whitespace())
        };
        let label_field = fields.next().unwrap_or_default();
        raw_labels.push(parse_label(label_field).map_err(|m| Error::format(Some(lineno), m))?);

        let before = values.len();
        for field in fields {
            let v: f64 =
                field.parse().map_err(|_| Error::format(Some(lineno), format!("non-numeric field `{field}`")))?;
            if !v.is_finite() {
                return Err(Error::format(Some(lineno), format!("non-finite value `{field}`")));
            }
            values.push(v);
        }
        let len = values.len() - before;
        match k {
            None if len == 0 => return Err(Error::format(Some(lineno), "pattern has no values after the label")),
            None => k = Some(len),
            Some(expected) if expected != len => {
                return Err(Error::format(Some(lineno), format!("ragged row: {len} values, expected {expected}")))
            }
            Some(_) => {}
        }
    }

    let Some(k) = k else {
        return Err(Error::format(None, "no patterns found"));
    };
    let patterns = Matrix::from_row_slice(raw_labels.len(), k, &values);
    Dataset::from_raw_labels(name, patterns, &raw_labels, split)
}

// UCR files write labels as integers or as float-formatted integers
// ("1.0000000e+00").
fn parse_label(field: &str) -> std::result::Result<i64, String> {
    if let Ok(v) = field.parse::<i64>() {
        return Ok(v);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(format!("class label `{field}` is not an integer")),
    }
}

/// UCR text with comma separators. Values use the shortest round-trip
/// representation, so parsing the output restores them bit-exactly.
pub fn to_ucr_string(d: &Dataset) -> String {
    let mut out = String::new();
    for (i, &label) in d.labels.iter().enumerate() {
        write!(out, "{}", d.label_map[label]).unwrap();
        for v in d.patterns.row(i).iter() {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_ucr(path: impl AsRef<Path>, d: &Dataset) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_ucr_string(d)).map_err(|e| Error::io(path, e))
}

/// Per-feature z-score with mean and population standard deviation taken from
/// `stats_from`. Features that are constant in `stats_from` pass through
/// unchanged.
pub fn normalize(d: &Dataset, stats_from: &Dataset) -> Result<Dataset> {
    if d.length() != stats_from.length() {
        return Err(Error::shape("normalize", stats_from.length(), d.length()));
    }
    let src = &stats_from.patterns;
    let p = src.nrows() as f64;
    let mut out = d.patterns.clone();
    for j in 0..d.length() {
        let col = src.column(j);
        if col.iter().all(|&v| v == col[0]) {
            continue;
        }
        let mean = col.sum() / p;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / p;
        let std = var.sqrt();
        out.column_mut(j).apply(|v| *v = (*v - mean) / std);
    }
    d.with_patterns(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseTargets {
    Train,
    Test,
    Both,
}

impl NoiseTargets {
    pub fn includes(self, split: Split) -> bool {
        matches!(
            (self, split),
            (NoiseTargets::Both, _) | (NoiseTargets::Train, Split::Train) | (NoiseTargets::Test, Split::Test)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
    pub targets: NoiseTargets,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self { snr_db, seed, targets: NoiseTargets::Both }
    }
}

/// Adds zero-mean Gaussian noise to every pattern of a targeted split.
///
/// The noise variance of each pattern is its own mean power divided by
/// `10^(snr_db / 10)`, so an all-zero pattern stays zero. Datasets whose
/// split is not targeted, and SNRs of [`CLEAN_SNR_DB`] or more, come back
/// unchanged. Train and test draw from separate sub-streams of `spec.seed`.
pub fn inject_noise(d: &Dataset, spec: &NoiseSpec) -> Result<Dataset> {
    if !spec.snr_db.is_finite() {
        return Err(Error::Parameter(format!("snr_db must be finite, got {}", spec.snr_db)));
    }
    if spec.snr_db >= CLEAN_SNR_DB || !spec.targets.includes(d.split) {
        return Ok(d.clone());
    }
    let ratio = 10f64.powf(spec.snr_db / 10.0);
    let mut rng = SeededRng::new(spec.seed, format!("noise/{}", d.split.as_str())).rng();
    let mut out = d.patterns.clone();
    let k = d.length() as f64;
    for mut row in out.row_iter_mut() {
        let power = row.iter().map(|v| v * v).sum::<f64>() / k;
        let sigma = (power / ratio).sqrt();
        for v in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
    }
    d.with_patterns(out)
}

/// `10 log10(sum clean^2 / sum (noisy - clean)^2)` over all entries;
/// `+inf` when the two are identical.
pub fn measured_snr(clean: &Dataset, noisy: &Dataset) -> Result<f64> {
    if clean.patterns.shape() != noisy.patterns.shape() {
        return Err(Error::shape(
            "measured_snr",
            format!("{}x{}", clean.n_patterns(), clean.length()),
            format!("{}x{}", noisy.n_patterns(), noisy.length()),
        ));
    }
    let signal: f64 = clean.patterns.iter().map(|v| v * v).sum();
    let noise: f64 = clean.patterns.iter().zip(noisy.patterns.iter()).map(|(c, n)| (n - c) * (n - c)).sum();
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / noise).log10())
}

/// Shape of a generated sine-family dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub name: String,
    pub n_train: usize,
    pub n_test: usize,
    pub length: usize,
    pub n_classes: usize,
    /// Std of the additive noise per class step: class `c` gets `c * noise_std`.
    pub noise_std: f64,
    /// Half-width of the uniform random phase offset, radians.
    pub phase_jitter: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            n_train: 40,
            n_test: 40,
            length: 64,
            n_classes: 2,
            noise_std: 0.3,
            phase_jitter: 0.25,
            seed: 0,
        }
    }
}

/// Sine versus noisy sine. Class 0 is a clean two-cycle sine; class `c`
/// oscillates at `2 + c` cycles with additive noise of std `c * noise_std`.
/// Labels cycle through the classes so every split stays balanced.
pub fn synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Dataset)> {
    if spec.n_classes < 2 {
        return Err(Error::Parameter("synthetic data needs at least 2 classes".into()));
    }
    if spec.length == 0 || spec.n_train == 0 || spec.n_test == 0 {
        return Err(Error::Parameter("synthetic sizes must be positive".into()));
    }
    if !(spec.noise_std >= 0.0 && spec.phase_jitter >= 0.0) {
        return Err(Error::Parameter("noise_std and phase_jitter must be >= 0".into()));
    }
    let rng = SeededRng::new(spec.seed, "synthetic");
    let make = |n: usize, split: Split| {
        let mut rng = rng.substream(split.as_str()).rng();
        let k = spec.length;
        let mut patterns = Matrix::zeros(n, k);
        let mut raw = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % spec.n_classes;
            let cycles = (2 + class) as f64;
            let phase =
                if spec.phase_jitter > 0.0 { rng.random_range(-spec.phase_jitter..=spec.phase_jitter) } else { 0.0 };
            let std = class as f64 * spec.noise_std;
            for t in 0..k {
                let angle = std::f64::consts::TAU * cycles * t as f64 / k as f64 + phase;
                let z: f64 = rng.sample(StandardNormal);
                patterns[(i, t)] = angle.sin() + std * z;
            }
            raw.push(class as i64);
        }
        let mut ds = Dataset::from_raw_labels(spec.name.clone(), patterns, &raw, split)?;
        if ds.n_classes() < spec.n_classes {
            ds = ds.relabel(&(0..spec.n_classes as i64).collect::<Vec<_>>())?;
        }
        Ok::<_, Error>(ds)
    };
    Ok((make(spec.n_train, Split::Train)?, make(spec.n_test, Split::Test)?))
}
