use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sigmoid;
use crate::error::{Error, Result};

/// Weights of one LSTM layer.
///
/// Each gate matrix is `hidden_size x (hidden_size + input_size)`, row-major,
/// acting on the concatenation `[h_{t-1}, x_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub hidden_size: usize,
    pub input_size: usize,
    pub w_f: Vec<f64>,
    pub w_i: Vec<f64>,
    pub w_c: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

pub(crate) const GATE_BLOCKS: [&str; 8] = ["w_f", "w_i", "w_c", "w_o", "b_f", "b_i", "b_c", "b_o"];

impl LstmParams {
    pub fn zeros(hidden_size: usize, input_size: usize) -> Self {
        let w = vec![0.0; hidden_size * (hidden_size + input_size)];
        let b = vec![0.0; hidden_size];
        LstmParams {
            hidden_size,
            input_size,
            w_f: w.clone(),
            w_i: w.clone(),
            w_c: w.clone(),
            w_o: w,
            b_f: b.clone(),
            b_i: b.clone(),
            b_c: b.clone(),
            b_o: b,
        }
    }

    /// Width of the concatenated `[h, x]` vector.
    pub fn concat_len(&self) -> usize {
        self.hidden_size + self.input_size
    }

    pub fn blocks(&self) -> [&[f64]; 8] {
        [
            &self.w_f, &self.w_i, &self.w_c, &self.w_o, &self.b_f, &self.b_i, &self.b_c, &self.b_o,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 8] {
        let LstmParams {
            w_f,
            w_i,
            w_c,
            w_o,
            b_f,
            b_i,
            b_c,
            b_o,
            ..
        } = self;
        [w_f, w_i, w_c, w_o, b_f, b_i, b_c, b_o]
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.input_size == 0 {
            return Err(Error::validation("LSTM sizes must be >= 1"));
        }
        let wlen = self.hidden_size * self.concat_len();
        for (k, block) in self.blocks().iter().enumerate() {
            let expected = if k < 4 { wlen } else { self.hidden_size };
            if block.len() != expected {
                return Err(Error::dim(GATE_BLOCKS[k], expected, block.len()));
            }
            if block.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(GATE_BLOCKS[k].into()));
            }
        }
        Ok(())
    }
}

/// Linear read-out from the hidden vector to a scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub w: Vec<f64>,
    pub b: f64,
}

impl DenseParams {
    pub fn zeros(n: usize) -> Self {
        DenseParams { w: vec![0.0; n], b: 0.0 }
    }

    pub fn apply(&self, h: &[f64]) -> f64 {
        self.w.iter().zip(h).map(|(w, h)| w * h).sum::<f64>() + self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(n: usize) -> Self {
        LstmState {
            h: vec![0.0; n],
            c: vec![0.0; n],
        }
    }
}

/// Everything one step needs kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    pub steps: Vec<StepRecord>,
}

impl Tape {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// One LSTM step.
pub fn lstm_step(p: &LstmParams, state: &LstmState, x: &[f64]) -> Result<(LstmState, StepRecord)> {
    let n = p.hidden_size;
    if x.len() != p.input_size {
        return Err(Error::dim("lstm input", p.input_size, x.len()));
    }
    if state.h.len() != n || state.c.len() != n {
        return Err(Error::dim("lstm state", n, state.h.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lstm input".into()));
    }

    let k = p.concat_len();
    let mut hx = Vec::with_capacity(k);
    hx.extend_from_slice(&state.h);
    hx.extend_from_slice(x);

    let mut f = vec![0.0; n];
    let mut i = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut o = vec![0.0; n];
    for r in 0..n {
        let row = r * k..(r + 1) * k;
        let dot = |w: &[f64]| w[row.clone()].iter().zip(&hx).map(|(a, b)| a * b).sum::<f64>();
        f[r] = sigmoid(dot(&p.w_f) + p.b_f[r]);
        i[r] = sigmoid(dot(&p.w_i) + p.b_i[r]);
        g[r] = (dot(&p.w_c) + p.b_c[r]).tanh();
        o[r] = sigmoid(dot(&p.w_o) + p.b_o[r]);
    }
    debug_assert!(f.iter().chain(&i).chain(&o).all(|v| (0.0..=1.0).contains(v)));
    debug_assert!(g.iter().all(|v| (-1.0..=1.0).contains(v)));

    let c: Vec<f64> = (0..n).map(|r| f[r] * state.c[r] + i[r] * g[r]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..n).map(|r| o[r] * tanh_c[r]).collect();

    let record = StepRecord {
        x: x.to_vec(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        f,
        i,
        g,
        o,
        c: c.clone(),
        tanh_c,
        h: h.clone(),
    };
    Ok((LstmState { h, c }, record))
}

fn forward_layer(p: &LstmParams, xs: &[Vec<f64>]) -> Result<Tape> {
    let mut state = LstmState::zeros(p.hidden_size);
    let mut tape = Tape {
        steps: Vec::with_capacity(xs.len()),
    };
    for x in xs {
        let (next, rec) = lstm_step(p, &state, x)?;
        state = next;
        tape.steps.push(rec);
    }
    Ok(tape)
}

/// Backpropagate through one layer given dL/dh_t from above for every step.
/// Returns the parameter gradients and dL/dx_t.
fn backward_layer(p: &LstmParams, tape: &Tape, dh_above: &[Vec<f64>]) -> (LstmParams, Vec<Vec<f64>>) {
    let n = p.hidden_size;
    let k = p.concat_len();
    let mut grads = LstmParams::zeros(n, p.input_size);
    let mut dxs = vec![vec![0.0; p.input_size]; tape.len()];
    let mut dh_next = vec![0.0; n];
    let mut dc_next = vec![0.0; n];
    let mut dz = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];

    for (t, rec) in tape.steps.iter().enumerate().rev() {
        for r in 0..n {
            let dh = dh_above[t][r] + dh_next[r];
            let d_o = dh * rec.tanh_c[r];
            let dc = dh * rec.o[r] * (1.0 - rec.tanh_c[r] * rec.tanh_c[r]) + dc_next[r];
            let d_f = dc * rec.c_prev[r];
            let d_i = dc * rec.g[r];
            let d_g = dc * rec.i[r];
            dc_next[r] = dc * rec.f[r];
            dz[0][r] = d_f * rec.f[r] * (1.0 - rec.f[r]);
            dz[1][r] = d_i * rec.i[r] * (1.0 - rec.i[r]);
            dz[2][r] = d_g * (1.0 - rec.g[r] * rec.g[r]);
            dz[3][r] = d_o * rec.o[r] * (1.0 - rec.o[r]);
        }

        let hx: Vec<f64> = rec.h_prev.iter().chain(&rec.x).copied().collect();
        let mut dhx = vec![0.0; k];
        let weights = [&p.w_f, &p.w_i, &p.w_c, &p.w_o];
        let LstmParams {
            w_f,
            w_i,
            w_c,
            w_o,
            b_f,
            b_i,
            b_c,
            b_o,
            ..
        } = &mut grads;
        let gw: [&mut Vec<f64>; 4] = [w_f, w_i, w_c, w_o];
        let gb: [&mut Vec<f64>; 4] = [b_f, b_i, b_c, b_o];
        for (gate, (gw, gb)) in gw.into_iter().zip(gb).enumerate() {
            let w = weights[gate];
            for r in 0..n {
                let d = dz[gate][r];
                if d == 0.0 {
                    continue;
                }
                gb[r] += d;
                let row = r * k;
                for c in 0..k {
                    gw[row + c] += d * hx[c];
                    dhx[c] += w[row + c] * d;
                }
            }
        }
        dh_next.copy_from_slice(&dhx[..n]);
        dxs[t].copy_from_slice(&dhx[n..]);
    }
    (grads, dxs)
}

/// Mean squared error.
pub fn mse(preds: &[f64], targets: &[f64]) -> f64 {
    preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / preds.len() as f64
}

/// LSTM layers followed by a linear head. A stack of one is the plain
/// per-depth model; deeper stacks feed each layer's hidden vector into the
/// next.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<LstmParams>,
    pub head: DenseParams,
}

/// Gradients share the parameter layout.
pub type Gradients = Network;

/// Recurrent state of every layer, for step-by-step inference.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub layers: Vec<LstmState>,
}

fn uniform_fill(rng: &mut ChaCha8Rng, dist: &Uniform<f64>, out: &mut [f64]) {
    for v in out {
        *v = dist.sample(rng);
    }
}

fn init_layer(rng: &mut ChaCha8Rng, hidden: usize, input: usize) -> LstmParams {
    let bound = 1.0 / (hidden as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    let mut p = LstmParams::zeros(hidden, input);
    for w in [&mut p.w_f, &mut p.w_i, &mut p.w_c, &mut p.w_o] {
        uniform_fill(rng, &dist, w);
    }
    p.b_f.fill(1.0);
    p
}

/// Seeded uniform(-1/sqrt(N), 1/sqrt(N)) weights, forget bias 1, other biases 0.
pub fn init_params(hidden: usize, input: usize, seed: u64) -> (LstmParams, DenseParams) {
    let net = Network::init(hidden, input, 1, seed);
    let Network { mut layers, head } = net;
    (layers.remove(0), head)
}

impl Network {
    pub fn init(hidden: usize, input: usize, stack_depth: usize, seed: u64) -> Self {
        assert!(hidden >= 1 && input >= 1 && stack_depth >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..stack_depth)
            .map(|k| init_layer(&mut rng, hidden, if k == 0 { input } else { hidden }))
            .collect();
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut head = DenseParams::zeros(hidden);
        uniform_fill(&mut rng, &Uniform::new_inclusive(-bound, bound), &mut head.w);
        Network { layers, head }
    }

    pub fn zeros_like(&self) -> Self {
        Network {
            layers: self
                .layers
                .iter()
                .map(|l| LstmParams::zeros(l.hidden_size, l.input_size))
                .collect(),
            head: DenseParams::zeros(self.head.w.len()),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].hidden_size
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size
    }

    /// Named parameter blocks in a fixed order.
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            for (name, block) in GATE_BLOCKS.iter().zip(layer.blocks()) {
                out.push((block_name(k, name), block));
            }
        }
        out.push(("head.w".into(), &self.head.w[..]));
        out.push(("head.b".into(), std::slice::from_ref(&self.head.b)));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (k, layer) in self.layers.iter_mut().enumerate() {
            for (name, block) in GATE_BLOCKS.iter().zip(layer.blocks_mut()) {
                out.push((block_name(k, name), block));
            }
        }
        out.push(("head.w".into(), &mut self.head.w[..]));
        out.push(("head.b".into(), std::slice::from_mut(&mut self.head.b)));
        out
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (_, b) in self.blocks() {
            out.extend_from_slice(b);
        }
        out
    }

    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::dim("flat parameters", self.param_count(), flat.len()));
        }
        let mut offset = 0;
        for (_, b) in self.blocks_mut() {
            let len = b.len();
            b.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Empty("network layers"));
        }
        for (k, l) in self.layers.iter().enumerate() {
            l.validate()?;
            let expected_input = if k == 0 { l.input_size } else { self.layers[k - 1].hidden_size };
            if l.input_size != expected_input {
                return Err(Error::dim("stacked layer input", expected_input, l.input_size));
            }
        }
        let top = self.layers[self.layers.len() - 1].hidden_size;
        if self.head.w.len() != top {
            return Err(Error::dim("head weights", top, self.head.w.len()));
        }
        if !self.head.b.is_finite() || self.head.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("head".into()));
        }
        Ok(())
    }

    /// Teacher-forced pass over a scalar sequence from a zero state.
    pub fn forward(&self, xs: &[f64]) -> Result<(Vec<f64>, Vec<Tape>)> {
        forward_stack(&self.layers, &self.head, xs)
    }

    /// MSE loss and its exact gradient for a tape produced by [`Network::forward`].
    pub fn backward(&self, tapes: &[Tape], targets: &[f64]) -> Result<(f64, Gradients)> {
        let (loss, layers, head) = backward_stack(&self.layers, &self.head, tapes, targets)?;
        Ok((loss, Network { layers, head }))
    }

    pub fn loss(&self, xs: &[f64], targets: &[f64]) -> Result<f64> {
        let (preds, _) = self.forward(xs)?;
        Ok(mse(&preds, targets))
    }

    pub fn zero_state(&self) -> NetworkState {
        NetworkState {
            layers: self.layers.iter().map(|l| LstmState::zeros(l.hidden_size)).collect(),
        }
    }

    /// Advance the state by one scalar input and return the head output.
    pub fn step(&self, state: &mut NetworkState, x: f64) -> Result<f64> {
        let mut input = vec![x];
        for (layer, st) in self.layers.iter().zip(state.layers.iter_mut()) {
            let (next, _) = lstm_step(layer, st, &input)?;
            *st = next;
            input.clone_from(&st.h);
        }
        Ok(self.head.apply(&input))
    }
}

fn block_name(layer: usize, name: &str) -> String {
    if layer == 0 {
        name.to_string()
    } else {
        format!("l{layer}.{name}")
    }
}

fn forward_stack(
    layers: &[LstmParams],
    head: &DenseParams,
    xs: &[f64],
) -> Result<(Vec<f64>, Vec<Tape>)> {
    if xs.is_empty() {
        return Err(Error::Empty("input sequence"));
    }
    let mut inputs: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let mut tapes = Vec::with_capacity(layers.len());
    for layer in layers {
        let tape = forward_layer(layer, &inputs)?;
        inputs = tape.steps.iter().map(|s| s.h.clone()).collect();
        tapes.push(tape);
    }
    let preds = inputs.iter().map(|h| head.apply(h)).collect();
    Ok((preds, tapes))
}

fn backward_stack(
    layers: &[LstmParams],
    head: &DenseParams,
    tapes: &[Tape],
    targets: &[f64],
) -> Result<(f64, Vec<LstmParams>, DenseParams)> {
    if tapes.len() != layers.len() {
        return Err(Error::dim("tape layers", layers.len(), tapes.len()));
    }
    let top = &tapes[tapes.len() - 1];
    if top.len() != targets.len() {
        return Err(Error::dim("targets", top.len(), targets.len()));
    }
    if top.is_empty() {
        return Err(Error::Empty("tape"));
    }
    let len = targets.len() as f64;
    let preds: Vec<f64> = top.steps.iter().map(|s| head.apply(&s.h)).collect();
    let loss = mse(&preds, targets);

    let mut head_grad = DenseParams::zeros(head.w.len());
    let mut dh: Vec<Vec<f64>> = Vec::with_capacity(top.len());
    for (t, rec) in top.steps.iter().enumerate() {
        let dp = 2.0 * (preds[t] - targets[t]) / len;
        head_grad.b += dp;
        for (g, h) in head_grad.w.iter_mut().zip(&rec.h) {
            *g += dp * h;
        }
        dh.push(head.w.iter().map(|w| w * dp).collect());
    }

    let mut grads = vec![None; layers.len()];
    for k in (0..layers.len()).rev() {
        let (g, dx) = backward_layer(&layers[k], &tapes[k], &dh);
        grads[k] = Some(g);
        dh = dx;
    }
    Ok((loss, grads.into_iter().map(Option::unwrap).collect(), head_grad))
}

/// Single-layer forward pass over a scalar sequence from a zero state.
/// Prediction t is `head.w . h_t + head.b`.
pub fn forward_sequence(p: &LstmParams, head: &DenseParams, xs: &[f64]) -> Result<(Vec<f64>, Tape)> {
    let (preds, mut tapes) = forward_stack(std::slice::from_ref(p), head, xs)?;
    Ok((preds, tapes.remove(0)))
}

/// BPTT gradients of the sequence MSE for a single layer.
pub fn backward_sequence(
    tape: &Tape,
    p: &LstmParams,
    head: &DenseParams,
    xs: &[f64],
    targets: &[f64],
) -> Result<Gradients> {
    if tape.len() != xs.len() {
        return Err(Error::dim("tape length", xs.len(), tape.len()));
    }
    let (_, layers, head) =
        backward_stack(std::slice::from_ref(p), head, std::slice::from_ref(tape), targets)?;
    Ok(Network { layers, head })
}
