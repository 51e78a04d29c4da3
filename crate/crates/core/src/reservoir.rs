//! Single- and multi-reservoir echo state encoders, plus the feed-forward
//! (ELM) variant that drops the recurrent term.
//!
//! Each whole pattern is one input vector `u` of length K. Layer 1 computes
//! `x1 = tanh(W_in [1; u] + W1 x1_prev + b_e1)` and layer `k > 1` computes
//! `xk = tanh(W_inter(k-1) x(k-1) + Wk xk_prev + b_ek)` from the previous
//! layer's state at the same step. The bias input of `W_in` is column 0.

use crate::dataio::Dataset;
use crate::numerics::{
    dense_random_matrix, ensure_finite, scale_to_spectral_radius, sparse_random_matrix, Matrix, SeededRng, Vector,
};
use crate::{Error, Result};

/// Largest f64 below 1. tanh rounds to exactly +-1 for |z| > ~19; states are
/// clamped here so they stay strictly inside (-1, 1).
pub const STATE_BOUND: f64 = 1.0 - f64::EPSILON / 2.0;

const MAX_RADIUS_RETRIES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirConfig {
    /// Neurons per reservoir (N).
    pub n_hidden: usize,
    /// Fraction of nonzero recurrent weights (beta).
    pub connectivity: f64,
    /// Spectral radius every recurrent matrix is scaled to (rho).
    pub spectral_radius: f64,
    /// Reservoir count (M).
    pub n_layers: usize,
    /// Pattern length (K).
    pub input_dim: usize,
    /// Half-width of the uniform range for the random `W_in` draw.
    pub input_scaling: f64,
    /// Half-width of the uniform range for the `b_e` and `b_d` draws; 0
    /// disables the separate biases.
    pub bias_scaling: f64,
}

impl ReservoirConfig {
    pub fn new(n_hidden: usize, connectivity: f64, input_dim: usize) -> Self {
        Self {
            n_hidden,
            connectivity,
            spectral_radius: 0.9,
            n_layers: 1,
            input_dim,
            input_scaling: 1.0,
            bias_scaling: 1.0,
        }
    }

    pub fn with_layers(mut self, n_layers: usize) -> Self {
        self.n_layers = n_layers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_hidden == 0 || self.input_dim == 0 || self.n_layers == 0 {
            return Err(Error::Parameter(format!(
                "n_hidden, input_dim and n_layers must be >= 1 (got {}, {}, {})",
                self.n_hidden, self.input_dim, self.n_layers
            )));
        }
        if !(self.connectivity > 0.0 && self.connectivity <= 1.0) {
            return Err(Error::Parameter(format!("connectivity must be in (0, 1], got {}", self.connectivity)));
        }
        if !(self.spectral_radius > 0.0 && self.spectral_radius < 1.0) {
            return Err(Error::Parameter(format!(
                "spectral radius target must be in (0, 1), got {}",
                self.spectral_radius
            )));
        }
        if !(self.input_scaling > 0.0 && self.input_scaling.is_finite()) {
            return Err(Error::Parameter(format!("input_scaling must be > 0, got {}", self.input_scaling)));
        }
        if !(self.bias_scaling >= 0.0 && self.bias_scaling.is_finite()) {
            return Err(Error::Parameter(format!("bias_scaling must be >= 0, got {}", self.bias_scaling)));
        }
        Ok(())
    }
}

/// One reservoir. `w` is `None` for feed-forward layers; `w_inter` is the
/// `N x N` link from the previous layer and is `None` for the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Option<Matrix>,
    pub w_inter: Option<Matrix>,
    pub b_e: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsnWeights {
    /// `N x (K + 1)`; column 0 multiplies the constant bias input.
    pub w_in: Matrix,
    pub layers: Vec<Layer>,
    /// Decoder bias, length K.
    pub b_d: Vector,
}

impl EsnWeights {
    pub fn n_hidden(&self) -> usize {
        self.w_in.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_in.ncols().saturating_sub(1)
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn is_recurrent(&self) -> bool {
        self.layers.iter().any(|l| l.w.is_some())
    }

    /// Checks every matrix against `N` and `K` and that all entries are finite.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_hidden();
        if n == 0 || self.w_in.ncols() < 2 {
            return Err(Error::shape("EsnWeights", "w_in of at least 1x2", dims(&self.w_in)));
        }
        if self.layers.is_empty() {
            return Err(Error::shape("EsnWeights", "at least one layer", 0));
        }
        if self.b_d.len() != self.input_dim() {
            return Err(Error::shape("EsnWeights b_d", self.input_dim(), self.b_d.len()));
        }
        ensure_finite(&self.w_in, "w_in")?;
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.b_e.len() != n {
                return Err(Error::shape("EsnWeights b_e", n, layer.b_e.len()));
            }
            if let Some(w) = &layer.w {
                if w.shape() != (n, n) {
                    return Err(Error::shape("EsnWeights w", format!("{n}x{n}"), dims(w)));
                }
                ensure_finite(w, "w")?;
            }
            match (&layer.w_inter, k) {
                (Some(_), 0) => return Err(Error::shape("EsnWeights", "no w_inter on layer 1", "w_inter")),
                (None, k) if k > 0 => {
                    return Err(Error::shape("EsnWeights", format!("w_inter on layer {}", k + 1), "none"))
                }
                (Some(wi), _) if wi.shape() != (n, n) => {
                    return Err(Error::shape("EsnWeights w_inter", format!("{n}x{n}"), dims(wi)))
                }
                (Some(wi), _) => ensure_finite(wi, "w_inter")?,
                _ => {}
            }
            if layer.b_e.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parameter("b_e contains non-finite values".into()));
            }
        }
        if self.b_d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("b_d contains non-finite values".into()));
        }
        Ok(())
    }

    /// Zero state for every layer.
    pub fn zero_state(&self) -> Vec<Vector> {
        vec![Vector::zeros(self.n_hidden()); self.n_layers()]
    }
}

fn dims(m: &Matrix) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

/// Random recurrent weights: dense `W_in`, each `W_k` sparse at the configured
/// connectivity and scaled to the spectral radius target, dense `W_inter`.
///
/// Sub-streams of `rng`: `win`, `w{k}`, `winter{k}`, `be{k}`, `bd`. A `W_k`
/// with zero spectral radius (possible at very low connectivity) is redrawn
/// from `w{k}/retry{r}`.
pub fn init_weights(cfg: &ReservoirConfig, rng: &SeededRng) -> Result<EsnWeights> {
    init(cfg, rng, true)
}

/// Same draws as [`init_weights`] minus the recurrent matrices.
pub fn init_feedforward_weights(cfg: &ReservoirConfig, rng: &SeededRng) -> Result<EsnWeights> {
    init(cfg, rng, false)
}

fn init(cfg: &ReservoirConfig, rng: &SeededRng, recurrent: bool) -> Result<EsnWeights> {
    cfg.validate()?;
    let n = cfg.n_hidden;
    let w_in = dense_random_matrix(n, cfg.input_dim + 1, -cfg.input_scaling, cfg.input_scaling, &rng.substream("win"))?;
    let bias = |name: &str, len: usize| -> Result<Vector> {
        let m = dense_random_matrix(len, 1, -cfg.bias_scaling, cfg.bias_scaling, &rng.substream(name))?;
        Ok(m.column(0).into_owned())
    };
    let mut layers = Vec::with_capacity(cfg.n_layers);
    for k in 1..=cfg.n_layers {
        let w = if recurrent { Some(recurrent_matrix(cfg, &rng.substream(&format!("w{k}")))?) } else { None };
        let w_inter = if k > 1 {
            Some(dense_random_matrix(n, n, -1.0, 1.0, &rng.substream(&format!("winter{}", k - 1)))?)
        } else {
            None
        };
        layers.push(Layer { w, w_inter, b_e: bias(&format!("be{k}"), n)? });
    }
    Ok(EsnWeights { w_in, layers, b_d: bias("bd", cfg.input_dim)? })
}

fn recurrent_matrix(cfg: &ReservoirConfig, rng: &SeededRng) -> Result<Matrix> {
    let n = cfg.n_hidden;
    let mut last_err = None;
    for attempt in 0..=MAX_RADIUS_RETRIES {
        let stream = if attempt == 0 { rng.clone() } else { rng.substream(&format!("retry{attempt}")) };
        let w = sparse_random_matrix(n, n, cfg.connectivity, -1.0, 1.0, &stream)?;
        match scale_to_spectral_radius(&w, cfg.spectral_radius) {
            Ok(scaled) => {
                if attempt > 0 {
                    log::debug!("{}: nilpotent draw, accepted retry {attempt}", rng.stream());
                }
                return Ok(scaled);
            }
            Err(e @ Error::DegenerateMatrix(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateMatrix(format!(
        "no recurrent matrix with nonzero spectral radius after {} draws at N={n}, connectivity={} ({})",
        MAX_RADIUS_RETRIES + 1,
        cfg.connectivity,
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

#[inline]
fn squash(z: f64) -> f64 {
    z.tanh().clamp(-STATE_BOUND, STATE_BOUND)
}

/// `W_in [1; u]` for one pattern.
fn input_drive(w_in: &Matrix, u: &[f64]) -> Vector {
    let mut z = w_in.column(0).into_owned();
    for (j, &uj) in u.iter().enumerate() {
        if uj != 0.0 {
            z.axpy(uj, &w_in.column(j + 1), 1.0);
        }
    }
    z
}

fn advance(weights: &EsnWeights, state: &mut [Vector], u: &[f64]) {
    let mut drive = input_drive(&weights.w_in, u);
    for (k, layer) in weights.layers.iter().enumerate() {
        if k > 0 {
            let below = &state[k - 1];
            let w_inter = layer.w_inter.as_ref().expect("validated");
            drive = w_inter * below;
        }
        if let Some(w) = &layer.w {
            drive.gemv(1.0, w, &state[k], 1.0);
        }
        drive += &layer.b_e;
        drive.apply(|v| *v = squash(*v));
        state[k].copy_from(&drive);
    }
}

/// One time step. Returns the new state of every layer.
pub fn step(weights: &EsnWeights, x_prev: &[Vector], u: &[f64]) -> Result<Vec<Vector>> {
    weights.validate()?;
    check_state(weights, x_prev)?;
    if u.len() != weights.input_dim() {
        return Err(Error::shape("step input", weights.input_dim(), u.len()));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("step input contains non-finite values".into()));
    }
    let mut state = x_prev.to_vec();
    advance(weights, &mut state, u);
    Ok(state)
}

fn check_state(weights: &EsnWeights, x: &[Vector]) -> Result<()> {
    if x.len() != weights.n_layers() {
        return Err(Error::shape("state layers", weights.n_layers(), x.len()));
    }
    if let Some(bad) = x.iter().find(|v| v.len() != weights.n_hidden()) {
        return Err(Error::shape("state length", weights.n_hidden(), bad.len()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ResetPolicy {
    /// State flows from one pattern to the next.
    #[default]
    Carry,
    /// State is zeroed before each pattern.
    Reset,
}

impl ResetPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            ResetPolicy::Carry => "carry",
            ResetPolicy::Reset => "reset",
        }
    }
}

impl std::str::FromStr for ResetPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "carry" => Ok(ResetPolicy::Carry),
            "reset" => Ok(ResetPolicy::Reset),
            other => Err(Error::Parameter(format!("unknown reset policy `{other}` (expected carry or reset)"))),
        }
    }
}

/// Hidden states of every layer, one `N x p` matrix per layer, column `j`
/// holding the state after pattern `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrace {
    pub layers: Vec<Matrix>,
}

impl StateTrace {
    /// States of the last layer: the feature matrix H.
    pub fn h(&self) -> &Matrix {
        self.layers.last().expect("trace has at least one layer")
    }

    pub fn into_h(mut self) -> Matrix {
        self.layers.pop().expect("trace has at least one layer")
    }

    pub fn n_patterns(&self) -> usize {
        self.h().ncols()
    }
}

/// Feeds the patterns of `d` in order from a zero initial state.
pub fn run_collect(weights: &EsnWeights, d: &Dataset, policy: ResetPolicy) -> Result<StateTrace> {
    run_from(weights, d, policy, &weights.zero_state())
}

/// [`run_collect`] from an arbitrary initial state. Under
/// [`ResetPolicy::Reset`] the initial state is used only for the first
/// pattern.
pub fn run_from(weights: &EsnWeights, d: &Dataset, policy: ResetPolicy, initial: &[Vector]) -> Result<StateTrace> {
    weights.validate()?;
    check_state(weights, initial)?;
    if d.length() != weights.input_dim() {
        return Err(Error::shape("run_collect dataset length", weights.input_dim(), d.length()));
    }
    let p = d.n_patterns();
    let mut trace = vec![Matrix::zeros(weights.n_hidden(), p); weights.n_layers()];
    let mut state = initial.to_vec();
    let mut u = vec![0.0; d.length()];
    for j in 0..p {
        if policy == ResetPolicy::Reset && j > 0 {
            state.iter_mut().for_each(|x| x.fill(0.0));
        }
        for (dst, src) in u.iter_mut().zip(d.patterns().row(j).iter()) {
            *dst = *src;
        }
        advance(weights, &mut state, &u);
        for (layer, x) in trace.iter_mut().zip(&state) {
            layer.set_column(j, x);
        }
    }
    Ok(StateTrace { layers: trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Split;

    fn one_by_one(w_in: [f64; 2]) -> EsnWeights {
        EsnWeights {
            w_in: Matrix::from_row_slice(1, 2, &w_in),
            layers: vec![Layer { w: Some(Matrix::zeros(1, 1)), w_inter: None, b_e: Vector::zeros(1) }],
            b_d: Vector::zeros(1),
        }
    }

    #[test]
    fn closed_form_single_neuron() {
        // Bias column 0 gets weight 0, the input column weight 1.
        let w = one_by_one([0.0, 1.0]);
        let x = step(&w, &w.zero_state(), &[0.5]).unwrap();
        assert!((x[0][0] - 0.46211715726).abs() < 1e-11);
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let w = one_by_one([0.0, 0.0]);
        let x = step(&w, &w.zero_state(), &[3.0]).unwrap();
        assert_eq!(x[0][0], 0.0);
    }

    #[test]
    fn saturated_states_stay_inside_unit_interval() {
        let w = one_by_one([0.0, 100.0]);
        let x = step(&w, &w.zero_state(), &[1.0]).unwrap();
        assert!(x[0][0] < 1.0);
        let x = step(&w, &w.zero_state(), &[-1.0]).unwrap();
        assert!(x[0][0] > -1.0);
    }

    #[test]
    fn ecg200_shapes_and_counts() {
        let cfg = ReservoirConfig::new(150, 0.1, 96);
        let w = init_weights(&cfg, &SeededRng::new(1, "init")).unwrap();
        assert_eq!(w.w_in.shape(), (150, 97));
        let rec = w.layers[0].w.as_ref().unwrap();
        assert_eq!(rec.iter().filter(|v| **v != 0.0).count(), 2250);
        assert!(w.layers[0].w_inter.is_none());
        assert_eq!(w.n_layers(), 1);
    }

    #[test]
    fn earthquakes_nonzero_count() {
        let cfg = ReservoirConfig::new(600, 0.002, 512);
        let w = init_weights(&cfg, &SeededRng::new(2, "init")).unwrap();
        let rec = w.layers[0].w.as_ref().unwrap();
        assert_eq!(rec.iter().filter(|v| **v != 0.0).count(), 720);
    }

    #[test]
    fn feedforward_shares_input_draw() {
        let cfg = ReservoirConfig::new(20, 0.2, 5).with_layers(2);
        let rng = SeededRng::new(3, "c");
        let esn = init_weights(&cfg, &rng).unwrap();
        let elm = init_feedforward_weights(&cfg, &rng).unwrap();
        assert_eq!(esn.w_in, elm.w_in);
        assert_eq!(esn.layers[1].w_inter, elm.layers[1].w_inter);
        assert!(elm.layers.iter().all(|l| l.w.is_none()));
        assert!(!elm.is_recurrent());
    }

    #[test]
    fn rejects_bad_config_and_shapes() {
        let mut cfg = ReservoirConfig::new(10, 0.1, 3);
        cfg.spectral_radius = 1.0;
        assert!(matches!(init_weights(&cfg, &SeededRng::new(0, "x")), Err(Error::Parameter(_))));
        let w = one_by_one([0.0, 1.0]);
        assert!(matches!(step(&w, &w.zero_state(), &[1.0, 2.0]), Err(Error::Shape { .. })));
        assert!(matches!(step(&w, &[], &[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn carry_and_reset_differ_on_second_pattern() {
        let cfg = ReservoirConfig::new(8, 0.5, 3);
        let w = init_weights(&cfg, &SeededRng::new(4, "c")).unwrap();
        let m = Matrix::from_row_slice(2, 3, &[0.5, -0.2, 0.1, 0.3, 0.3, -0.7]);
        let d = Dataset::from_raw_labels("t", m, &[0, 1], Split::Train).unwrap();
        let carry = run_collect(&w, &d, ResetPolicy::Carry).unwrap();
        let reset = run_collect(&w, &d, ResetPolicy::Reset).unwrap();
        assert_eq!(carry.h().column(0), reset.h().column(0));
        assert_ne!(carry.h().column(1), reset.h().column(1));
    }

    #[test]
    fn reset_policy_parses() {
        assert_eq!("carry".parse::<ResetPolicy>().unwrap(), ResetPolicy::Carry);
        assert!("sideways".parse::<ResetPolicy>().is_err());
    }
}
