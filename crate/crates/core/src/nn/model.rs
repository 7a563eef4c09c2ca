use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    /// LSTM cell; its output is the hidden state `h`.
    Recurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn dense(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::Dense,
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn recurrent(in_dim: usize, units: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Recurrent,
            in_dim,
            out_dim: units,
            activation: Activation::Linear,
        }
    }

    pub fn param_count(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.out_dim * self.in_dim + self.out_dim,
            LayerKind::Recurrent => {
                let h = self.out_dim;
                4 * h * self.in_dim + 4 * h * h + 4 * h
            }
        }
    }
}

/// Layer-by-layer architecture plus the seed used to initialize it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(layers: Vec<LayerSpec>, seed: u64) -> Result<Self, NnError> {
        let spec = ModelSpec { layers, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds `input -> LSTM(units[0]) -> ... -> dense(h[0], relu) -> ... -> dense(out, linear)`.
    pub fn stacked(
        input: usize,
        recurrent_units: &[usize],
        hidden: &[usize],
        output: usize,
        seed: u64,
    ) -> Result<Self, NnError> {
        let mut layers = Vec::new();
        let mut dim = input;
        for &u in recurrent_units {
            layers.push(LayerSpec::recurrent(dim, u));
            dim = u;
        }
        for &h in hidden {
            layers.push(LayerSpec::dense(dim, h, Activation::Relu));
            dim = h;
        }
        layers.push(LayerSpec::dense(dim, output, Activation::Linear));
        ModelSpec::new(layers, seed)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.layers.is_empty() {
            return Err(NnError::InvalidSpec("model has no layers".into()));
        }
        let mut seen_dense = false;
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(NnError::InvalidSpec(format!("layer {i} has a zero dimension")));
            }
            match l.kind {
                LayerKind::Dense => seen_dense = true,
                LayerKind::Recurrent => {
                    if seen_dense {
                        return Err(NnError::InvalidSpec(format!(
                            "recurrent layer {i} follows a dense layer"
                        )));
                    }
                    if l.activation != Activation::Linear {
                        return Err(NnError::InvalidSpec(format!(
                            "recurrent layer {i} cannot take an output activation"
                        )));
                    }
                }
            }
            if i > 0 && self.layers[i - 1].out_dim != l.in_dim {
                return Err(NnError::InvalidSpec(format!(
                    "layer {} outputs {} but layer {i} expects {}",
                    i - 1,
                    self.layers[i - 1].out_dim,
                    l.in_dim
                )));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    pub fn has_recurrent(&self) -> bool {
        self.layers.iter().any(|l| l.kind == LayerKind::Recurrent)
    }

    /// Output widths of every layer, input to output.
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.out_dim).collect()
    }
}

/// Hidden and cell state for every recurrent layer, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl RecurrentState {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let units: Vec<usize> = spec
            .layers
            .iter()
            .filter(|l| l.kind == LayerKind::Recurrent)
            .map(|l| l.out_dim)
            .collect();
        RecurrentState {
            h: units.iter().map(|&u| vec![0.0; u]).collect(),
            c: units.iter().map(|&u| vec![0.0; u]).collect(),
        }
    }
}

/// Gradients with respect to the flat parameter vector and to every input step.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub inputs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct LstmStep {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
enum LayerCache {
    Dense { x: Vec<Vec<f64>>, pre: Vec<Vec<f64>> },
    Recurrent { steps: Vec<LstmStep> },
}

/// Activations recorded by [`Model::forward_sequence`], consumed by [`Model::backward`].
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    steps: usize,
    spec: Option<ModelSpec>,
}

impl ForwardCache {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }
}

/// A model specification together with its parameters.
///
/// Per-layer layout: dense layers store `W` (`out x in`, row-major) then `b`.
/// LSTM layers store `W` (`4H x in`), `U` (`4H x H`) and `b` (`4H`), gate
/// blocks ordered input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn offsets_for(spec: &ModelSpec) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(spec.layers.len());
    let mut at = 0;
    for l in &spec.layers {
        offsets.push(at);
        at += l.param_count();
    }
    offsets
}

impl Model {
    /// Glorot-uniform weights, zero biases, forget-gate biases at +1.
    pub fn new(spec: ModelSpec) -> Result<Self, NnError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut params = Vec::with_capacity(spec.param_count());
        for l in &spec.layers {
            match l.kind {
                LayerKind::Dense => {
                    let limit = (6.0 / (l.in_dim + l.out_dim) as f64).sqrt();
                    params.extend((0..l.in_dim * l.out_dim).map(|_| rng.gen_range(-limit..limit)));
                    params.extend(std::iter::repeat_n(0.0, l.out_dim));
                }
                LayerKind::Recurrent => {
                    let h = l.out_dim;
                    let w_limit = (6.0 / (l.in_dim + h) as f64).sqrt();
                    let u_limit = (6.0 / (2 * h) as f64).sqrt();
                    params.extend((0..4 * h * l.in_dim).map(|_| rng.gen_range(-w_limit..w_limit)));
                    params.extend((0..4 * h * h).map(|_| rng.gen_range(-u_limit..u_limit)));
                    params.extend((0..4 * h).map(|k| if (h..2 * h).contains(&k) { 1.0 } else { 0.0 }));
                }
            }
        }
        let offsets = offsets_for(&spec);
        Ok(Model {
            spec,
            params,
            offsets,
        })
    }

    pub fn zeros(spec: ModelSpec) -> Result<Self, NnError> {
        spec.validate()?;
        let n = spec.param_count();
        Model::from_params(spec, vec![0.0; n])
    }

    pub fn from_params(spec: ModelSpec, params: Vec<f64>) -> Result<Self, NnError> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(NnError::ParamCount {
                expected: spec.param_count(),
                got: params.len(),
            });
        }
        let offsets = offsets_for(&spec);
        Ok(Model {
            spec,
            params,
            offsets,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn layer_params(&self, i: usize) -> &[f64] {
        let start = self.offsets[i];
        &self.params[start..start + self.spec.layers[i].param_count()]
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        let expected = self.spec.input_dim();
        if x.len() != expected {
            return Err(NnError::Dimension {
                layer: 0,
                expected,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// One time step. `hidden` defaults to zeros; the returned state is
    /// `Some` iff the model has recurrent layers.
    pub fn forward(
        &self,
        input: &Tensor,
        hidden: Option<&RecurrentState>,
    ) -> Result<(Tensor, Option<RecurrentState>), NnError> {
        self.check_input(input.values())?;
        let mut state = match hidden {
            Some(s) => s.clone(),
            None => RecurrentState::zeros(&self.spec),
        };
        let mut x = input.values().to_vec();
        let mut r = 0;
        for (li, l) in self.spec.layers.iter().enumerate() {
            let p = self.layer_params(li);
            match l.kind {
                LayerKind::Dense => {
                    let (_, y) = dense_step(p, l, &x);
                    x = y;
                }
                LayerKind::Recurrent => {
                    if state.h[r].len() != l.out_dim || state.c[r].len() != l.out_dim {
                        return Err(NnError::Dimension {
                            layer: li,
                            expected: l.out_dim,
                            got: state.h[r].len(),
                        });
                    }
                    let step = lstm_step(p, l, x, &state.h[r], &state.c[r]);
                    let (h, c) = step.outputs();
                    state.h[r] = h.clone();
                    state.c[r] = c;
                    x = h;
                    r += 1;
                }
            }
        }
        let out = Tensor::vector(x)?;
        let state = if self.spec.has_recurrent() {
            Some(state)
        } else {
            None
        };
        Ok((out, state))
    }

    /// Plain evaluation of one input vector with zero recurrent state.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let (y, _) = self.forward(&Tensor::vector(x.to_vec())?, None)?;
        Ok(y.into_values())
    }

    /// Runs a whole sequence from zero recurrent state, caching every
    /// activation needed by [`Model::backward`].
    pub fn forward_sequence(
        &self,
        inputs: &[Vec<f64>],
    ) -> Result<(Vec<Vec<f64>>, ForwardCache), NnError> {
        for x in inputs {
            self.check_input(x)?;
        }
        let mut current: Vec<Vec<f64>> = inputs.to_vec();
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        for (li, l) in self.spec.layers.iter().enumerate() {
            let p = self.layer_params(li);
            match l.kind {
                LayerKind::Dense => {
                    let mut pre_all = Vec::with_capacity(current.len());
                    let mut out = Vec::with_capacity(current.len());
                    for x in &current {
                        let (pre, y) = dense_step(p, l, x);
                        pre_all.push(pre);
                        out.push(y);
                    }
                    caches.push(LayerCache::Dense {
                        x: std::mem::replace(&mut current, out),
                        pre: pre_all,
                    });
                }
                LayerKind::Recurrent => {
                    let mut h = vec![0.0; l.out_dim];
                    let mut c = vec![0.0; l.out_dim];
                    let mut steps = Vec::with_capacity(current.len());
                    let mut out = Vec::with_capacity(current.len());
                    for x in current.drain(..) {
                        let step = lstm_step(p, l, x, &h, &c);
                        let (nh, nc) = step.outputs();
                        out.push(nh.clone());
                        h = nh;
                        c = nc;
                        steps.push(step);
                    }
                    current = out;
                    caches.push(LayerCache::Recurrent { steps });
                }
            }
        }
        let cache = ForwardCache {
            layers: caches,
            steps: inputs.len(),
            spec: Some(self.spec.clone()),
        };
        Ok((current, cache))
    }

    /// Back-propagates per-step output gradients through the cached pass
    /// (full back-propagation through time for recurrent layers).
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grads: &[Vec<f64>],
    ) -> Result<Gradients, NnError> {
        if cache.steps == 0 {
            return Err(NnError::NoForwardState);
        }
        if cache.spec.as_ref() != Some(&self.spec) {
            return Err(NnError::InvalidSpec(
                "forward cache was recorded by a different architecture".into(),
            ));
        }
        if output_grads.len() != cache.steps {
            return Err(NnError::Shape(vec![cache.steps], vec![output_grads.len()]));
        }
        let out_dim = self.spec.output_dim();
        if let Some(g) = output_grads.iter().find(|g| g.len() != out_dim) {
            return Err(NnError::Shape(vec![out_dim], vec![g.len()]));
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut upstream: Vec<Vec<f64>> = output_grads.to_vec();
        for li in (0..self.spec.layers.len()).rev() {
            let l = &self.spec.layers[li];
            let p = self.layer_params(li);
            let start = self.offsets[li];
            let g = &mut grads[start..start + l.param_count()];
            upstream = match &cache.layers[li] {
                LayerCache::Dense { x, pre } => dense_backward(p, l, x, pre, &upstream, g),
                LayerCache::Recurrent { steps } => lstm_backward(p, l, steps, &upstream, g),
            };
        }
        Ok(Gradients {
            params: grads,
            inputs: upstream,
        })
    }
}

fn dense_step(p: &[f64], l: &LayerSpec, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (n_in, n_out) = (l.in_dim, l.out_dim);
    let (w, b) = p.split_at(n_in * n_out);
    let pre: Vec<f64> = (0..n_out)
        .map(|r| {
            let row = &w[r * n_in..(r + 1) * n_in];
            b[r] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
        })
        .collect();
    let y = match l.activation {
        Activation::Relu => pre.iter().map(|v| v.max(0.0)).collect(),
        Activation::Linear => pre.clone(),
    };
    (pre, y)
}

fn dense_backward(
    p: &[f64],
    l: &LayerSpec,
    xs: &[Vec<f64>],
    pres: &[Vec<f64>],
    upstream: &[Vec<f64>],
    g: &mut [f64],
) -> Vec<Vec<f64>> {
    let (n_in, n_out) = (l.in_dim, l.out_dim);
    let w = &p[..n_in * n_out];
    let (gw, gb) = g.split_at_mut(n_in * n_out);
    let mut down = Vec::with_capacity(xs.len());
    for ((x, pre), dy) in xs.iter().zip(pres).zip(upstream) {
        let mut dx = vec![0.0; n_in];
        for r in 0..n_out {
            let dz = match l.activation {
                Activation::Relu if pre[r] <= 0.0 => 0.0,
                _ => dy[r],
            };
            if dz == 0.0 {
                continue;
            }
            gb[r] += dz;
            let row = &w[r * n_in..(r + 1) * n_in];
            let grow = &mut gw[r * n_in..(r + 1) * n_in];
            for c in 0..n_in {
                grow[c] += dz * x[c];
                dx[c] += dz * row[c];
            }
        }
        down.push(dx);
    }
    down
}

impl LstmStep {
    fn outputs(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.o.iter().zip(&self.tanh_c).map(|(o, t)| o * t).collect();
        let c = (0..self.f.len())
            .map(|k| self.f[k] * self.c_prev[k] + self.i[k] * self.g[k])
            .collect();
        (h, c)
    }
}

fn lstm_step(p: &[f64], l: &LayerSpec, x: Vec<f64>, h_prev: &[f64], c_prev: &[f64]) -> LstmStep {
    let (n_in, h) = (l.in_dim, l.out_dim);
    let w = &p[..4 * h * n_in];
    let u = &p[4 * h * n_in..4 * h * n_in + 4 * h * h];
    let b = &p[4 * h * n_in + 4 * h * h..];
    let mut z = b.to_vec();
    for (r, zr) in z.iter_mut().enumerate() {
        let wr = &w[r * n_in..(r + 1) * n_in];
        let ur = &u[r * h..(r + 1) * h];
        *zr += wr.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>()
            + ur.iter().zip(h_prev).map(|(a, v)| a * v).sum::<f64>();
    }
    let i: Vec<f64> = z[..h].iter().map(|v| sigmoid(*v)).collect();
    let f: Vec<f64> = z[h..2 * h].iter().map(|v| sigmoid(*v)).collect();
    let g: Vec<f64> = z[2 * h..3 * h].iter().map(|v| v.tanh()).collect();
    let o: Vec<f64> = z[3 * h..].iter().map(|v| sigmoid(*v)).collect();
    let tanh_c = (0..h).map(|k| (f[k] * c_prev[k] + i[k] * g[k]).tanh()).collect();
    LstmStep {
        x,
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        i,
        f,
        g,
        o,
        tanh_c,
    }
}

fn lstm_backward(
    p: &[f64],
    l: &LayerSpec,
    steps: &[LstmStep],
    upstream: &[Vec<f64>],
    g: &mut [f64],
) -> Vec<Vec<f64>> {
    let (n_in, h) = (l.in_dim, l.out_dim);
    let w = &p[..4 * h * n_in];
    let u = &p[4 * h * n_in..4 * h * n_in + 4 * h * h];
    let (gw, rest) = g.split_at_mut(4 * h * n_in);
    let (gu, gb) = rest.split_at_mut(4 * h * h);
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut down = vec![Vec::new(); steps.len()];
    let mut dz = vec![0.0; 4 * h];
    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        for k in 0..h {
            let dh = upstream[t][k] + dh_next[k];
            let dc = dc_next[k] + dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            let d_o = dh * s.tanh_c[k];
            let d_i = dc * s.g[k];
            let d_g = dc * s.i[k];
            let d_f = dc * s.c_prev[k];
            dc_next[k] = dc * s.f[k];
            dz[k] = d_i * s.i[k] * (1.0 - s.i[k]);
            dz[h + k] = d_f * s.f[k] * (1.0 - s.f[k]);
            dz[2 * h + k] = d_g * (1.0 - s.g[k] * s.g[k]);
            dz[3 * h + k] = d_o * s.o[k] * (1.0 - s.o[k]);
        }
        let mut dx = vec![0.0; n_in];
        let mut dh_prev = vec![0.0; h];
        for r in 0..4 * h {
            let d = dz[r];
            if d == 0.0 {
                continue;
            }
            gb[r] += d;
            let wr = &w[r * n_in..(r + 1) * n_in];
            let gwr = &mut gw[r * n_in..(r + 1) * n_in];
            for c in 0..n_in {
                gwr[c] += d * s.x[c];
                dx[c] += d * wr[c];
            }
            let ur = &u[r * h..(r + 1) * h];
            let gur = &mut gu[r * h..(r + 1) * h];
            for c in 0..h {
                gur[c] += d * s.h_prev[c];
                dh_prev[c] += d * ur[c];
            }
        }
        dh_next = dh_prev;
        down[t] = dx;
    }
    down
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_model(n: usize) -> Model {
        let spec = ModelSpec::new(vec![LayerSpec::dense(n, n, Activation::Linear)], 0).unwrap();
        let mut params = vec![0.0; n * n + n];
        for i in 0..n {
            params[i * n + i] = 1.0;
        }
        Model::from_params(spec, params).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let m = identity_model(3);
        let (y, h) = m
            .forward(&Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap(), None)
            .unwrap();
        assert_eq!(y.values(), &[1.0, 2.0, 3.0]);
        assert!(h.is_none());
    }

    #[test]
    fn relu_layer_clamps_negatives() {
        let spec = ModelSpec::new(vec![LayerSpec::dense(3, 3, Activation::Relu)], 0).unwrap();
        let mut params = vec![0.0; 12];
        for i in 0..3 {
            params[i * 3 + i] = 1.0;
        }
        let m = Model::from_params(spec, params).unwrap();
        assert_eq!(m.predict(&[-1.0, 0.0, 2.0]).unwrap(), vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn two_layer_matches_matrix_chain() {
        use nalgebra::{DMatrix, DVector};
        let m = Model::new(ModelSpec::stacked(4, &[], &[5], 3, 21).unwrap()).unwrap();
        let p = m.params();
        let w1 = DMatrix::from_row_slice(5, 4, &p[..20]);
        let b1 = DVector::from_row_slice(&p[20..25]);
        let w2 = DMatrix::from_row_slice(3, 5, &p[25..40]);
        let b2 = DVector::from_row_slice(&p[40..43]);
        let x = DVector::from_row_slice(&[0.7, -1.3, 0.2, 2.0]);
        let hidden = (&w1 * &x + b1).map(|v| v.max(0.0));
        let expect = &w2 * hidden + b2;
        let got = m.predict(x.as_slice()).unwrap();
        for k in 0..3 {
            assert!((got[k] - expect[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_error_names_layer() {
        let m = identity_model(3);
        match m.predict(&[1.0, 2.0]) {
            Err(NnError::Dimension { layer, expected, got }) => {
                assert_eq!((layer, expected, got), (0, 3, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::new(
            vec![
                LayerSpec::dense(3, 4, Activation::Relu),
                LayerSpec::dense(5, 1, Activation::Linear)
            ],
            0
        )
        .is_err());
        assert!(ModelSpec::new(
            vec![
                LayerSpec::dense(3, 4, Activation::Relu),
                LayerSpec::recurrent(4, 4)
            ],
            0
        )
        .is_err());
        assert!(ModelSpec::new(vec![], 0).is_err());
        let s = ModelSpec::stacked(9, &[64, 32], &[256, 64], 3, 1).unwrap();
        assert_eq!(s.widths(), vec![64, 32, 256, 64, 3]);
    }

    #[test]
    fn recurrent_forward_returns_state_and_is_deterministic() {
        let spec = ModelSpec::stacked(4, &[5], &[6], 2, 11).unwrap();
        let m = Model::new(spec.clone()).unwrap();
        let x = Tensor::vector(vec![0.1, -0.2, 0.3, 0.4]).unwrap();
        let (y1, h1) = m.forward(&x, None).unwrap();
        let (y2, h2) = m.forward(&x, None).unwrap();
        assert_eq!(y1, y2);
        assert_eq!(h1, h2);
        let h1 = h1.unwrap();
        let (y3, _) = m.forward(&x, Some(&h1)).unwrap();
        assert_ne!(y1, y3);
        assert_eq!(Model::new(spec).unwrap(), m);
    }

    #[test]
    fn step_forward_matches_sequence_forward() {
        let spec = ModelSpec::stacked(3, &[4, 3], &[5], 2, 3).unwrap();
        let m = Model::new(spec).unwrap();
        let xs = vec![vec![0.1, 0.2, 0.3], vec![-0.3, 0.5, 0.0], vec![1.0, -1.0, 0.5]];
        let (seq, _) = m.forward_sequence(&xs).unwrap();
        let mut state = None;
        for (x, expect) in xs.iter().zip(&seq) {
            let (y, s) = m
                .forward(&Tensor::vector(x.clone()).unwrap(), state.as_ref())
                .unwrap();
            assert_eq!(y.values(), expect.as_slice());
            state = s;
        }
    }

    #[test]
    fn backward_requires_cache() {
        let m = identity_model(2);
        assert!(matches!(
            m.backward(&ForwardCache::default(), &[]),
            Err(NnError::NoForwardState)
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let m = Model::new(ModelSpec::stacked(3, &[4], &[5], 2, 9).unwrap()).unwrap();
        let xs = vec![vec![0.3, -0.1, 0.2]; 4];
        let (_, cache) = m.forward_sequence(&xs).unwrap();
        let g = m.backward(&cache, &vec![vec![0.0; 2]; 4]).unwrap();
        assert!(g.params.iter().all(|v| *v == 0.0));
        assert!(g.inputs.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn single_weight_chain_rule() {
        let spec = ModelSpec::new(vec![LayerSpec::dense(1, 1, Activation::Linear)], 0).unwrap();
        let m = Model::from_params(spec, vec![2.0, 0.0]).unwrap();
        let (_, cache) = m.forward_sequence(&[vec![3.0]]).unwrap();
        let g = m.backward(&cache, &[vec![1.0]]).unwrap();
        assert_eq!(g.params, vec![3.0, 1.0]);
        assert_eq!(g.inputs, vec![vec![2.0]]);
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = Model::zeros(ModelSpec::stacked(6, &[8], &[16], 4, 0).unwrap()).unwrap();
        assert!(m.predict(&[1.0; 6]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn forget_bias_initialized_to_one() {
        let spec = ModelSpec::new(vec![LayerSpec::recurrent(2, 3)], 5).unwrap();
        let m = Model::new(spec).unwrap();
        let b = &m.params()[4 * 3 * 2 + 4 * 3 * 3..];
        assert_eq!(b, &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
