//! Autoencoder training: pseudo-inverse readout, best-of-N candidate
//! selection, encoder/decoder tying and state recomputation.
//!
//! All four kinds share one procedure. For each candidate draw the hidden
//! states H (`N x p`) of the training patterns are collected and the decoder
//! `W_out = (U - b_d) pinv(H)` is fitted, `U` being the `K x p` pattern
//! matrix. The candidate with the smallest `||W_out H - (U - b_d)||_F / p`
//! wins, its input weights are overwritten with `W_out^T` (bias column
//! kept), the states of every layer are recomputed with the tied encoder and
//! the decoder is refitted on them.

use std::fmt::Write as _;
use std::str::FromStr;

use base64::Engine as _;
use rayon::prelude::*;

use crate::container::WeightContainer;
use crate::dataio::Dataset;
use crate::numerics::{default_pinv_tolerance, pinv, Matrix, SeededRng, Vector};
use crate::reservoir::{
    init_feedforward_weights, init_weights, run_collect, EsnWeights, Layer, ReservoirConfig, ResetPolicy,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AutoencoderKind {
    EsnRae,
    MlEsnRae,
    ElmAe,
    MlElmAe,
}

impl AutoencoderKind {
    pub const ALL: [AutoencoderKind; 4] =
        [AutoencoderKind::EsnRae, AutoencoderKind::MlEsnRae, AutoencoderKind::ElmAe, AutoencoderKind::MlElmAe];

    pub fn as_str(self) -> &'static str {
        match self {
            AutoencoderKind::EsnRae => "esn-rae",
            AutoencoderKind::MlEsnRae => "ml-esn-rae",
            AutoencoderKind::ElmAe => "elm-ae",
            AutoencoderKind::MlElmAe => "ml-elm-ae",
        }
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, AutoencoderKind::EsnRae | AutoencoderKind::MlEsnRae)
    }

    pub fn is_multilayer(self) -> bool {
        matches!(self, AutoencoderKind::MlEsnRae | AutoencoderKind::MlElmAe)
    }
}

impl std::fmt::Display for AutoencoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AutoencoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown autoencoder kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaeTrainSpec {
    pub cfg: ReservoirConfig,
    pub n_candidates: usize,
    pub seed: u64,
    pub reset_policy: ResetPolicy,
    /// Relative singular-value cutoff; `None` uses
    /// [`default_pinv_tolerance`].
    pub pinv_tolerance: Option<f64>,
}

impl RaeTrainSpec {
    pub fn new(cfg: ReservoirConfig, seed: u64) -> Self {
        Self { cfg, n_candidates: 10, seed, reset_policy: ResetPolicy::Carry, pinv_tolerance: None }
    }

    fn tolerance(&self, h: &Matrix) -> f64 {
        self.pinv_tolerance.unwrap_or_else(|| default_pinv_tolerance(h.nrows(), h.ncols()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAutoencoder {
    pub kind: AutoencoderKind,
    pub spec: RaeTrainSpec,
    /// Encoder after tying.
    pub weights: EsnWeights,
    /// Decoder of the chosen candidate (`K x N`); `weights.w_in` holds its
    /// transpose in columns `1..=K`.
    pub w_out: Matrix,
    /// Decoder refitted on the recomputed states.
    pub decoder: Matrix,
    /// Score of the chosen candidate before tying.
    pub pre_tying_error: f64,
    /// Score of `decoder` on `features_train`.
    pub reconstruction_error: f64,
    /// Pre-tying score of every candidate; `NaN` for a candidate that failed.
    pub candidate_errors: Vec<f64>,
    pub chosen_candidate: usize,
    /// Last-layer states of the training set under the tied encoder, `N x p`.
    pub features_train: Matrix,
}

impl TrainedAutoencoder {
    pub fn input_dim(&self) -> usize {
        self.weights.input_dim()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.n_hidden()
    }
}

/// Least-squares decoder `targets pinv(h)` (`K x N` for `h: N x p`,
/// `targets: K x p`) with the default pseudo-inverse cutoff.
pub fn train_readout(h: &Matrix, targets: &Matrix) -> Result<Matrix> {
    train_readout_with_tolerance(h, targets, default_pinv_tolerance(h.nrows(), h.ncols()))
}

pub fn train_readout_with_tolerance(h: &Matrix, targets: &Matrix, tolerance: f64) -> Result<Matrix> {
    if h.ncols() != targets.ncols() {
        return Err(Error::shape("train_readout pattern count", h.ncols(), targets.ncols()));
    }
    if h.iter().all(|&v| v == 0.0) {
        return Err(Error::Numerical("hidden-state matrix is all zero; readout is undetermined".into()));
    }
    let h_pinv = pinv(h, tolerance)?;
    Ok(targets * h_pinv)
}

/// `||w_out h - targets||_F / p`.
pub fn reconstruction_error(w_out: &Matrix, h: &Matrix, targets: &Matrix) -> Result<f64> {
    if w_out.ncols() != h.nrows() || h.ncols() != targets.ncols() || w_out.nrows() != targets.nrows() {
        return Err(Error::shape(
            "reconstruction_error",
            "K x N, N x p, K x p",
            format!(
                "{}x{}, {}x{}, {}x{}",
                w_out.nrows(),
                w_out.ncols(),
                h.nrows(),
                h.ncols(),
                targets.nrows(),
                targets.ncols()
            ),
        ));
    }
    Ok((w_out * h - targets).norm() / h.ncols() as f64)
}

/// `U - b_d` as a `K x p` matrix.
fn decoder_targets(d: &Dataset, b_d: &Vector) -> Matrix {
    let mut t = d.patterns().transpose();
    for mut col in t.column_iter_mut() {
        col -= b_d;
    }
    t
}

struct Candidate {
    weights: EsnWeights,
    w_out: Matrix,
    error: f64,
}

fn check_spec(d: &Dataset, spec: &RaeTrainSpec, kind: AutoencoderKind) -> Result<()> {
    spec.cfg.validate()?;
    if spec.n_candidates == 0 {
        return Err(Error::Parameter("n_candidates must be >= 1".into()));
    }
    if let Some(t) = spec.pinv_tolerance {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Parameter(format!("pinv tolerance must be >= 0, got {t}")));
        }
    }
    if d.length() != spec.cfg.input_dim {
        return Err(Error::shape("fit dataset length", spec.cfg.input_dim, d.length()));
    }
    match (kind.is_multilayer(), spec.cfg.n_layers) {
        (true, m) if m < 2 => Err(Error::Parameter(format!("{kind} needs n_layers >= 2, got {m}"))),
        (false, m) if m != 1 => Err(Error::Parameter(format!("{kind} needs n_layers = 1, got {m}"))),
        _ => Ok(()),
    }
}

fn candidate(d: &Dataset, spec: &RaeTrainSpec, kind: AutoencoderKind, index: usize) -> Result<Candidate> {
    let rng = SeededRng::new(spec.seed, format!("cand{index}"));
    let weights =
        if kind.is_recurrent() { init_weights(&spec.cfg, &rng)? } else { init_feedforward_weights(&spec.cfg, &rng)? };
    let h = run_collect(&weights, d, spec.reset_policy)?.into_h();
    let targets = decoder_targets(d, &weights.b_d);
    let w_out = train_readout_with_tolerance(&h, &targets, spec.tolerance(&h))?;
    let error = reconstruction_error(&w_out, &h, &targets)?;
    if !error.is_finite() {
        return Err(Error::Numerical(format!("candidate {index} has non-finite reconstruction error")));
    }
    Ok(Candidate { weights, w_out, error })
}

/// Trains an autoencoder of `kind` on `d_train`.
pub fn fit(d_train: &Dataset, spec: &RaeTrainSpec, kind: AutoencoderKind) -> Result<TrainedAutoencoder> {
    check_spec(d_train, spec, kind)?;

    let results: Vec<Result<Candidate>> =
        (0..spec.n_candidates).into_par_iter().map(|c| candidate(d_train, spec, kind, c)).collect();

    let candidate_errors: Vec<f64> = results.iter().map(|r| r.as_ref().map_or(f64::NAN, |c| c.error)).collect();
    let mut best: Option<(usize, Candidate)> = None;
    let mut first_failure = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(c) => {
                if best.as_ref().is_none_or(|(_, b)| c.error < b.error) {
                    best = Some((i, c));
                }
            }
            Err(e) => {
                log::warn!("{kind} candidate {i} failed: {e}");
                first_failure.get_or_insert(e);
            }
        }
    }
    let Some((chosen, Candidate { mut weights, w_out, error })) = best else {
        return Err(Error::Training(format!(
            "all {} candidates failed; first error: {}",
            spec.n_candidates,
            first_failure.map(|e| e.to_string()).unwrap_or_default()
        )));
    };

    // The decoder reads the last reservoir, so its transpose only fits the
    // first layer's input weights because every reservoir has N neurons.
    assert_eq!(w_out.ncols(), weights.n_hidden());
    let k = weights.input_dim();
    weights.w_in.columns_mut(1, k).copy_from(&w_out.transpose());

    let h = run_collect(&weights, d_train, spec.reset_policy)?.into_h();
    let targets = decoder_targets(d_train, &weights.b_d);
    let decoder = train_readout_with_tolerance(&h, &targets, spec.tolerance(&h))?;
    let final_error = reconstruction_error(&decoder, &h, &targets)?;
    log::debug!(
        "{kind}: chose candidate {chosen} of {} (error {error:.6e}), after tying {final_error:.6e}",
        spec.n_candidates
    );

    Ok(TrainedAutoencoder {
        kind,
        spec: spec.clone(),
        weights,
        w_out,
        decoder,
        pre_tying_error: error,
        reconstruction_error: final_error,
        candidate_errors,
        chosen_candidate: chosen,
        features_train: h,
    })
}

/// Features of `d` under the tied encoder: last-layer states, `N x p`.
pub fn encode(t: &TrainedAutoencoder, d: &Dataset) -> Result<Matrix> {
    if d.length() != t.input_dim() {
        return Err(Error::shape("encode dataset length", t.input_dim(), d.length()));
    }
    Ok(run_collect(&t.weights, d, t.spec.reset_policy)?.into_h())
}

const ENVELOPE_TAG: &str = "esnrae-autoencoder";
const ENVELOPE_VERSION: u32 = 1;
const BASE64_LINE: usize = 76;

/// Text envelope: `key: value` header lines, a `---` line, then the weight
/// container as base64 (standard alphabet, 76-column lines).
pub fn to_envelope(t: &TrainedAutoencoder) -> Result<String> {
    let c = &t.spec.cfg;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| writeln!(s, "{k}: {v}").unwrap();
    kv(ENVELOPE_TAG, ENVELOPE_VERSION.to_string());
    kv("kind", t.kind.to_string());
    kv("seed", t.spec.seed.to_string());
    kv("n_candidates", t.spec.n_candidates.to_string());
    kv("reset_policy", t.spec.reset_policy.as_str().into());
    kv("pinv_tolerance", t.spec.pinv_tolerance.map_or_else(|| "default".into(), |v| v.to_string()));
    kv("n_hidden", c.n_hidden.to_string());
    kv("connectivity", c.connectivity.to_string());
    kv("spectral_radius", c.spectral_radius.to_string());
    kv("n_layers", c.n_layers.to_string());
    kv("input_dim", c.input_dim.to_string());
    kv("input_scaling", c.input_scaling.to_string());
    kv("bias_scaling", c.bias_scaling.to_string());
    kv("chosen_candidate", t.chosen_candidate.to_string());
    kv("pre_tying_error", t.pre_tying_error.to_string());
    kv("reconstruction_error", t.reconstruction_error.to_string());
    kv("candidate_errors", t.candidate_errors.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    s.push_str("---\n");

    let b64 = base64::engine::general_purpose::STANDARD.encode(weights_container(t)?.to_bytes());
    for chunk in b64.as_bytes().chunks(BASE64_LINE) {
        s.push_str(std::str::from_utf8(chunk).expect("base64 is ASCII"));
        s.push('\n');
    }
    Ok(s)
}

fn weights_container(t: &TrainedAutoencoder) -> Result<WeightContainer> {
    let mut c = WeightContainer::new();
    let w = &t.weights;
    c.insert("w_in", w.w_in.clone())?;
    c.insert("b_d", Matrix::from_column_slice(w.b_d.len(), 1, w.b_d.as_slice()))?;
    for (k, layer) in w.layers.iter().enumerate() {
        let k = k + 1;
        if let Some(m) = &layer.w {
            c.insert(format!("layer{k}.w"), m.clone())?;
        }
        if let Some(m) = &layer.w_inter {
            c.insert(format!("layer{k}.w_inter"), m.clone())?;
        }
        c.insert(format!("layer{k}.b_e"), Matrix::from_column_slice(layer.b_e.len(), 1, layer.b_e.as_slice()))?;
    }
    c.insert("w_out", t.w_out.clone())?;
    c.insert("decoder", t.decoder.clone())?;
    c.insert("features_train", t.features_train.clone())?;
    Ok(c)
}

fn env_err(message: impl Into<String>) -> Error {
    Error::Format { line: None, message: message.into() }
}

fn column(c: &WeightContainer, name: &str) -> Result<Vector> {
    let m = c.require(name)?;
    if m.ncols() != 1 {
        return Err(env_err(format!("entry `{name}` must be a column, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(m.column(0).into_owned())
}

/// Inverse of [`to_envelope`].
pub fn from_envelope(text: &str) -> Result<TrainedAutoencoder> {
    let mut header = std::collections::BTreeMap::new();
    let mut lines = text.lines().enumerate();
    let mut terminated = false;
    for (i, line) in lines.by_ref() {
        if line == "---" {
            terminated = true;
            break;
        }
        let (k, v) = line.split_once(": ").ok_or_else(|| Error::format(Some(i + 1), "expected `key: value`"))?;
        if header.insert(k.to_owned(), v.to_owned()).is_some() {
            return Err(Error::format(Some(i + 1), format!("duplicate key `{k}`")));
        }
    }
    if !terminated {
        return Err(env_err("missing `---` header terminator"));
    }
    let b64: String = lines.map(|(_, l)| l.trim()).collect();

    let mut take = |k: &str| header.remove(k).ok_or_else(|| env_err(format!("missing header key `{k}`")));
    fn num<T: FromStr>(k: &str, v: String) -> Result<T> {
        v.parse().map_err(|_| env_err(format!("bad value `{v}` for `{k}`")))
    }
    let version: u32 = num(ENVELOPE_TAG, take(ENVELOPE_TAG)?)?;
    if version != ENVELOPE_VERSION {
        return Err(env_err(format!("unsupported envelope version {version}")));
    }
    let kind: AutoencoderKind = take("kind")?.parse().map_err(|e: Error| env_err(e.to_string()))?;
    let seed = num("seed", take("seed")?)?;
    let n_candidates = num("n_candidates", take("n_candidates")?)?;
    let reset_policy: ResetPolicy = take("reset_policy")?.parse().map_err(|e: Error| env_err(e.to_string()))?;
    let pinv_tolerance = match take("pinv_tolerance")?.as_str() {
        "default" => None,
        v => Some(num("pinv_tolerance", v.to_owned())?),
    };
    let cfg = ReservoirConfig {
        n_hidden: num("n_hidden", take("n_hidden")?)?,
        connectivity: num("connectivity", take("connectivity")?)?,
        spectral_radius: num("spectral_radius", take("spectral_radius")?)?,
        n_layers: num("n_layers", take("n_layers")?)?,
        input_dim: num("input_dim", take("input_dim")?)?,
        input_scaling: num("input_scaling", take("input_scaling")?)?,
        bias_scaling: num("bias_scaling", take("bias_scaling")?)?,
    };
    let chosen_candidate = num("chosen_candidate", take("chosen_candidate")?)?;
    let pre_tying_error = num("pre_tying_error", take("pre_tying_error")?)?;
    let reconstruction_error = num("reconstruction_error", take("reconstruction_error")?)?;
    let candidate_errors = take("candidate_errors")?
        .split(',')
        .map(|v| num("candidate_errors", v.to_owned()))
        .collect::<Result<Vec<f64>>>()?;
    if let Some(k) = header.keys().next() {
        return Err(env_err(format!("unknown header key `{k}`")));
    }

    let bytes = base64::engine::general_purpose::STANDARD
        .decode(b64.as_bytes())
        .map_err(|e| env_err(format!("bad base64 payload: {e}")))?;
    let c = WeightContainer::from_bytes(&bytes)?;

    let mut layers = Vec::with_capacity(cfg.n_layers.min(1024));
    for k in 1..=cfg.n_layers {
        if c.get(&format!("layer{k}.b_e")).is_none() {
            return Err(env_err(format!("container has no layer {k}")));
        }
        layers.push(Layer {
            w: c.get(&format!("layer{k}.w")).cloned(),
            w_inter: c.get(&format!("layer{k}.w_inter")).cloned(),
            b_e: column(&c, &format!("layer{k}.b_e"))?,
        });
    }
    let weights = EsnWeights { w_in: c.require("w_in")?.clone(), layers, b_d: column(&c, "b_d")? };

    let spec = RaeTrainSpec { cfg, n_candidates, seed, reset_policy, pinv_tolerance };
    let t = TrainedAutoencoder {
        kind,
        spec,
        weights,
        w_out: c.require("w_out")?.clone(),
        decoder: c.require("decoder")?.clone(),
        pre_tying_error,
        reconstruction_error,
        candidate_errors,
        chosen_candidate,
        features_train: c.require("features_train")?.clone(),
    };
    check_loaded(&t)?;
    Ok(t)
}

fn check_loaded(t: &TrainedAutoencoder) -> Result<()> {
    t.spec.cfg.validate().map_err(|e| env_err(e.to_string()))?;
    t.weights.validate().map_err(|e| env_err(e.to_string()))?;
    let (n, k) = (t.weights.n_hidden(), t.weights.input_dim());
    let cfg = &t.spec.cfg;
    if n != cfg.n_hidden || k != cfg.input_dim || t.weights.n_layers() != cfg.n_layers {
        return Err(env_err("weights do not match the header configuration"));
    }
    if t.weights.is_recurrent() != t.kind.is_recurrent()
        || t.weights.layers.iter().any(|l| l.w.is_some() != t.kind.is_recurrent())
    {
        return Err(env_err(format!("recurrent matrices do not match kind {}", t.kind)));
    }
    for m in [&t.w_out, &t.decoder] {
        if m.shape() != (k, n) {
            return Err(env_err(format!("decoder must be {k}x{n}, got {}x{}", m.nrows(), m.ncols())));
        }
    }
    if t.features_train.nrows() != n {
        return Err(env_err("features_train row count differs from N"));
    }
    if t.candidate_errors.len() != t.spec.n_candidates || t.chosen_candidate >= t.spec.n_candidates {
        return Err(env_err("candidate bookkeeping does not match n_candidates"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{synthetic, SyntheticSpec};

    #[test]
    fn identity_readout() {
        let i3 = Matrix::identity(3, 3);
        let w = train_readout(&i3, &i3).unwrap();
        assert!((w - &i3).amax() < 1e-15);
    }

    #[test]
    fn zero_readout_error_closed_form() {
        let h = Matrix::from_fn(4, 5, |i, j| (i + j) as f64);
        let t = Matrix::from_fn(2, 5, |i, j| (i * j) as f64 - 1.0);
        let e = reconstruction_error(&Matrix::zeros(2, 4), &h, &t).unwrap();
        assert!((e - t.norm() / 5.0).abs() < 1e-15);
    }

    #[test]
    fn all_zero_states_are_rejected() {
        assert!(matches!(train_readout(&Matrix::zeros(3, 4), &Matrix::zeros(2, 4)), Err(Error::Numerical(_))));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in AutoencoderKind::ALL {
            assert_eq!(k.as_str().parse::<AutoencoderKind>().unwrap(), k);
        }
        assert!("vae".parse::<AutoencoderKind>().is_err());
    }

    #[test]
    fn layer_count_must_match_kind() {
        let (train, _) = synthetic(&SyntheticSpec::default()).unwrap();
        let cfg = ReservoirConfig::new(10, 0.2, train.length());
        assert!(fit(&train, &RaeTrainSpec::new(cfg.clone(), 0), AutoencoderKind::MlEsnRae).is_err());
        let spec = RaeTrainSpec::new(cfg.with_layers(2), 0);
        assert!(fit(&train, &spec, AutoencoderKind::EsnRae).is_err());
    }

    #[test]
    fn envelope_round_trip() {
        let (train, _) = synthetic(&SyntheticSpec::default()).unwrap();
        let cfg = ReservoirConfig::new(12, 0.25, train.length()).with_layers(2);
        let mut spec = RaeTrainSpec::new(cfg, 5);
        spec.n_candidates = 3;
        let t = fit(&train, &spec, AutoencoderKind::MlEsnRae).unwrap();
        let text = to_envelope(&t).unwrap();
        let back = from_envelope(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(to_envelope(&back).unwrap(), text);
    }
}
