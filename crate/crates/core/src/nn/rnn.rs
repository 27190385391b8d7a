use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use super::gru::{gru_cell_backward, gru_step, GruCache};
use super::init::{glorot_with, zero_init_bias};
use super::lstm::{lstm_cell_backward, lstm_output, lstm_step, LstmCache};
use super::matrix::Matrix;
use super::params::{BufferKind, ParamView, Parameters};
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }

    /// `gates * (input + hidden + 1) * hidden`, one bias per gate.
    pub fn layer_param_count(self, input_dim: usize, hidden_dim: usize) -> usize {
        self.gates() * (input_dim + hidden_dim + 1) * hidden_dim
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::invalid(
                "cell kind",
                format!("{other:?} (expected lstm or gru)"),
            )),
        }
    }
}

/// One recurrent layer: `W` is `gates*hidden x input`, `U` is
/// `gates*hidden x hidden`, one bias vector of `gates*hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnLayer<T> {
    pub kind: CellKind,
    pub w: Matrix<T>,
    pub u: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Real> RnnLayer<T> {
    pub fn new(kind: CellKind, input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let g = kind.gates() * hidden_dim;
        Self {
            kind,
            w: glorot_with(rng, input_dim, g),
            u: glorot_with(rng, hidden_dim, g),
            bias: zero_init_bias(g),
        }
    }

    pub fn zeros(kind: CellKind, input_dim: usize, hidden_dim: usize) -> Self {
        let g = kind.gates() * hidden_dim;
        Self {
            kind,
            w: Matrix::zeros(g, input_dim),
            u: Matrix::zeros(g, hidden_dim),
            bias: zero_init_bias(g),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.u.cols()
    }

    pub(crate) fn views(&self, prefix: &str) -> Vec<ParamView<'_, T>> {
        alloc::vec![
            ParamView {
                name: format!("{prefix}.w"),
                kind: BufferKind::Weight,
                shape: alloc::vec![self.w.rows(), self.w.cols()],
                data: self.w.as_slice(),
            },
            ParamView {
                name: format!("{prefix}.u"),
                kind: BufferKind::Weight,
                shape: alloc::vec![self.u.rows(), self.u.cols()],
                data: self.u.as_slice(),
            },
            ParamView {
                name: format!("{prefix}.bias"),
                kind: BufferKind::Bias,
                shape: alloc::vec![self.bias.len()],
                data: &self.bias,
            },
        ]
    }

    pub(crate) fn views_mut(&mut self) -> Vec<&mut [T]> {
        alloc::vec![
            self.w.as_mut_slice(),
            self.u.as_mut_slice(),
            self.bias.as_mut_slice()
        ]
    }
}

impl<T: Real> Parameters<T> for RnnLayer<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        self.views("rnn")
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.views_mut()
    }
}

/// Recurrent state of one layer; `c` is empty for GRU layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

#[derive(Debug, Clone)]
enum StepCache<T> {
    Lstm(LstmCache<T>),
    Gru(GruCache<T>),
}

impl<T: Real> StepCache<T> {
    fn for_kind(kind: CellKind) -> Self {
        match kind {
            CellKind::Lstm => StepCache::Lstm(LstmCache::default()),
            CellKind::Gru => StepCache::Gru(GruCache::default()),
        }
    }
}

/// Advances one layer by one step, updating `state` and `cache`.
fn layer_step<T: Real>(
    layer: &RnnLayer<T>,
    x: &[T],
    state: &mut LayerState<T>,
    cache: &mut StepCache<T>,
) {
    match cache {
        StepCache::Lstm(c) => {
            lstm_step(layer, x, &state.h, &state.c, c);
            lstm_output(c, layer.hidden_dim(), &mut state.h);
            state.c.copy_from_slice(&c.c);
        }
        StepCache::Gru(c) => {
            gru_step(layer, x, &state.h, c);
            state.h.copy_from_slice(&c.h);
        }
    }
}

/// Streaming state for a whole stack.
#[derive(Debug, Clone)]
pub struct EncoderState<T> {
    pub layers: Vec<LayerState<T>>,
    scratch: Vec<StepCache<T>>,
}

impl<T: Real> EncoderState<T> {
    pub fn reset(&mut self) {
        for l in &mut self.layers {
            l.h.iter_mut().for_each(|v| *v = T::zero());
            l.c.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Output of the top layer after the most recent step.
    pub fn output(&self) -> &[T] {
        &self.layers.last().expect("encoder has layers").h
    }
}

/// Per-step caches of a full sequence forward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache<T> {
    steps: Vec<Vec<StepCache<T>>>,
    frames: usize,
}

impl<T> EncoderCache<T> {
    pub fn frames(&self) -> usize {
        self.frames
    }
}

/// Unidirectional stacked RNN with zero initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<T> {
    pub layers: Vec<RnnLayer<T>>,
}

impl<T: Real> Encoder<T> {
    pub fn new(
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
        num_layers: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(num_layers >= 1 && hidden_dim >= 1 && input_dim >= 1);
        let layers = (0..num_layers)
            .map(|l| {
                RnnLayer::new(
                    kind,
                    if l == 0 { input_dim } else { hidden_dim },
                    hidden_dim,
                    rng,
                )
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(kind: CellKind, input_dim: usize, hidden_dim: usize, num_layers: usize) -> Self {
        let layers = (0..num_layers)
            .map(|l| {
                RnnLayer::zeros(
                    kind,
                    if l == 0 { input_dim } else { hidden_dim },
                    hidden_dim,
                )
            })
            .collect();
        Self { layers }
    }

    pub fn kind(&self) -> CellKind {
        self.layers[0].kind
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers.last().expect("encoder has layers").hidden_dim()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn initial_state(&self) -> EncoderState<T> {
        let layers = self
            .layers
            .iter()
            .map(|l| LayerState {
                h: alloc::vec![T::zero(); l.hidden_dim()],
                c: match l.kind {
                    CellKind::Lstm => alloc::vec![T::zero(); l.hidden_dim()],
                    CellKind::Gru => Vec::new(),
                },
            })
            .collect();
        let scratch = self
            .layers
            .iter()
            .map(|l| StepCache::for_kind(l.kind))
            .collect();
        EncoderState { layers, scratch }
    }

    /// One frame through every layer; returns the top-layer output.
    pub fn step<'s>(&self, state: &'s mut EncoderState<T>, x: &[T]) -> &'s [T] {
        for l in 0..self.layers.len() {
            let (below, rest) = state.layers.split_at_mut(l);
            let input = if l == 0 { x } else { &below[l - 1].h[..] };
            layer_step(&self.layers[l], input, &mut rest[0], &mut state.scratch[l]);
        }
        state.output()
    }

    /// Runs the stack over all frames of `x` (`T x input_dim`) from a zero
    /// state, returning the top-layer outputs `T x hidden_dim`.
    pub fn forward(&self, x: &Matrix<T>) -> Result<(Matrix<T>, EncoderCache<T>)> {
        if x.rows() == 0 {
            return Err(Error::EmptyInput("feature sequence"));
        }
        if x.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "encoder input width",
                expected: self.input_dim(),
                found: x.cols(),
            });
        }
        let mut state = self.initial_state();
        let mut out = Matrix::zeros(x.rows(), self.hidden_dim());
        let mut steps = Vec::with_capacity(x.rows());
        for t in 0..x.rows() {
            let h = self.step(&mut state, x.row(t));
            out.row_mut(t).copy_from_slice(h);
            steps.push(state.scratch.clone());
        }
        Ok((
            out,
            EncoderCache {
                steps,
                frames: x.rows(),
            },
        ))
    }

    /// Backpropagation through time. `dh` holds `dL/dh_t` for the top layer;
    /// gradients accumulate into `grad` and `dL/dx` is returned.
    pub fn backward(&self, cache: &EncoderCache<T>, dh: &Matrix<T>, grad: &mut Self) -> Matrix<T> {
        let frames = cache.frames;
        assert_eq!(dh.rows(), frames, "upstream gradient length");
        let mut upstream = dh.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let hd = layer.hidden_dim();
            let mut dx = Matrix::zeros(frames, layer.input_dim());
            let mut dh_next = alloc::vec![T::zero(); hd];
            let mut dc_next = alloc::vec![T::zero(); hd];
            for t in (0..frames).rev() {
                let mut dh_t = upstream.row(t).to_vec();
                for (a, &b) in dh_t.iter_mut().zip(&dh_next) {
                    *a += b;
                }
                match &cache.steps[t][l] {
                    StepCache::Lstm(c) => {
                        let (d_x, d_h, d_c) =
                            lstm_cell_backward(layer, c, &dh_t, &dc_next, &mut grad.layers[l]);
                        dx.row_mut(t).copy_from_slice(&d_x);
                        dh_next = d_h;
                        dc_next = d_c;
                    }
                    StepCache::Gru(c) => {
                        let (d_x, d_h) = gru_cell_backward(layer, c, &dh_t, &mut grad.layers[l]);
                        dx.row_mut(t).copy_from_slice(&d_x);
                        dh_next = d_h;
                    }
                }
            }
            upstream = dx;
        }
        upstream
    }

    pub(crate) fn views(&self, prefix: &str) -> Vec<ParamView<'_, T>> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.views(&format!("{prefix}.{i}")))
            .collect()
    }

    pub(crate) fn views_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| l.views_mut()).collect()
    }
}

impl<T: Real> Parameters<T> for Encoder<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        self.views("encoder")
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.views_mut()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_input(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn param_counts_follow_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in [CellKind::Lstm, CellKind::Gru] {
            let enc = Encoder::<f32>::new(kind, 40, 64, 2, &mut rng);
            let want = kind.layer_param_count(40, 64) + kind.layer_param_count(64, 64);
            assert_eq!(enc.param_count(), want);
        }
        assert_eq!(CellKind::Lstm.layer_param_count(40, 64), 26_880);
        assert_eq!(CellKind::Gru.layer_param_count(40, 64), 20_160);
    }

    #[test]
    fn single_frame_equals_one_cell_call() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = Encoder::<f64>::new(CellKind::Lstm, 3, 4, 1, &mut rng);
        let x = random_input(1, 3, 2);
        let (h, _) = enc.forward(&x).unwrap();
        let (h1, _, _) =
            super::super::lstm_cell_forward(&enc.layers[0], x.row(0), &[0.0; 4], &[0.0; 4]);
        assert_eq!(h.row(0), &h1[..]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let enc = Encoder::<f64>::zeros(CellKind::Gru, 3, 4, 2);
        let (h, _) = enc.forward(&random_input(7, 3, 3)).unwrap();
        assert!(h.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn prefix_and_carried_state_match_full_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [CellKind::Lstm, CellKind::Gru] {
            let enc = Encoder::<f32>::new(kind, 5, 6, 3, &mut rng);
            let x = random_input(20, 5, 5).map(|v| v as f32);
            let (full, _) = enc.forward(&x).unwrap();
            let mut state = enc.initial_state();
            for t in 0..20 {
                let h = enc.step(&mut state, x.row(t));
                assert_eq!(h, full.row(t));
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let enc = Encoder::<f64>::new(CellKind::Lstm, 3, 4, 2, &mut rng);
        let x = random_input(5, 3, 7);
        let (_, cache) = enc.forward(&x).unwrap();
        let mut grad = enc.zeros_like();
        let dx = enc.backward(&cache, &Matrix::zeros(5, 4), &mut grad);
        assert!(grad.flatten().iter().all(|&v| v == 0.0));
        assert!(dx.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_never_flows_forward_in_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for kind in [CellKind::Lstm, CellKind::Gru] {
            let enc = Encoder::<f64>::new(kind, 3, 4, 2, &mut rng);
            let x = random_input(6, 3, 11);
            let (_, cache) = enc.forward(&x).unwrap();
            let mut dh = Matrix::zeros(6, 4);
            dh.row_mut(2).iter_mut().for_each(|v| *v = 1.0);
            let mut grad = enc.zeros_like();
            let dx = enc.backward(&cache, &dh, &mut grad);
            for t in 3..6 {
                assert!(dx.row(t).iter().all(|&v| v == 0.0), "{kind} t={t}");
            }
            assert!(dx.row(2).iter().any(|&v| v != 0.0));
        }
    }

    #[test]
    fn without_recurrence_gradient_stays_local() {
        // U = 0 and the carry path (forget gate / update gate) saturated shut
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for kind in [CellKind::Lstm, CellKind::Gru] {
            let mut enc = Encoder::<f64>::new(kind, 3, 4, 1, &mut rng);
            let layer = &mut enc.layers[0];
            layer.u.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
            for j in 4..8 {
                layer.w.row_mut(j).iter_mut().for_each(|v| *v = 0.0);
                layer.bias[j] = -40.0;
            }
            let x = random_input(5, 3, 9);
            let (_, cache) = enc.forward(&x).unwrap();
            let mut dh = Matrix::zeros(5, 4);
            dh.row_mut(4).iter_mut().for_each(|v| *v = 1.0);
            let mut grad = enc.zeros_like();
            let dx = enc.backward(&cache, &dh, &mut grad);
            let scale = dx.row(4).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(scale > 0.0);
            for t in 0..4 {
                assert!(
                    dx.row(t).iter().all(|v| v.abs() < 1e-12 * scale),
                    "{kind} t={t}"
                );
            }
        }
    }

    #[test]
    fn parse_cell_kind() {
        assert_eq!("GRU".parse::<CellKind>().unwrap(), CellKind::Gru);
        assert!("rnn".parse::<CellKind>().is_err());
    }
}
