use rand::Rng;

use super::{axpy, dot, sigmoid, Tensor};
use crate::error::{Error, Result};

/// Gate blocks inside the fused weight matrix, in row order.
pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_CELL: usize = 2;
pub const GATE_OUTPUT: usize = 3;

/// Inverted dropout on the non-recurrent input of an LSTM layer.
///
/// One mask is drawn per sequence and shared across its time steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidConfig(format!("dropout rate {rate} not in [0, 1)")));
        }
        Ok(Dropout { rate })
    }

    /// Mask of `len` entries, each `1/(1-rate)` with probability `1-rate`
    /// and 0 otherwise.
    pub fn sample_mask<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<f64> {
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        (0..len)
            .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
            .collect()
    }
}

/// One LSTM layer.
///
/// The four gates share a fused `[4c, i+c]` weight matrix and `[4c]` bias;
/// rows `k·c..(k+1)·c` belong to gate `k` (input, forget, candidate,
/// output). Each gate multiplies the concatenation `[x_t, h_{t-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Per-step activations recorded by the forward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    batch: usize,
    steps: usize,
    /// `[T][B][i+c]` concatenated (masked) input and previous hidden state
    concat: Vec<f64>,
    /// `[T][B][4c]` gate activations after the nonlinearity
    gates: Vec<f64>,
    /// `[T][B][c]` cell states
    cells: Vec<f64>,
    /// `[T][B][c]` tanh of the cell states
    cells_tanh: Vec<f64>,
    /// `[B][i]` dropout mask, if one was applied
    mask: Option<Vec<f64>>,
}

impl LstmLayer {
    /// Glorot-uniform gate weights, zero biases, forget-gate bias 1.
    pub fn new<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeroed(input_size, hidden_size);
        let block = hidden_size * (input_size + hidden_size);
        for gate in layer.weights.data_mut().chunks_exact_mut(block) {
            Tensor::fill_glorot(gate, input_size + hidden_size, hidden_size, rng);
        }
        let c = hidden_size;
        layer.bias.data_mut()[GATE_FORGET * c..(GATE_FORGET + 1) * c].fill(1.0);
        layer
    }

    pub fn zeroed(input_size: usize, hidden_size: usize) -> Self {
        LstmLayer {
            weights: Tensor::zeros(&[4 * hidden_size, input_size + hidden_size]),
            bias: Tensor::zeros(&[4 * hidden_size]),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.weights.shape()[0] / 4
    }

    pub fn input_size(&self) -> usize {
        self.weights.shape()[1] - self.hidden_size()
    }

    /// `4·(c·(i+c)+c)`.
    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Weight rows of one gate, `[c, i+c]` row-major.
    pub fn gate_weights(&self, gate: usize) -> &[f64] {
        let block = self.hidden_size() * self.weights.shape()[1];
        &self.weights.data()[gate * block..(gate + 1) * block]
    }

    /// Runs a single `[T, i]` sequence from zero initial state and returns
    /// the `[T, c]` hidden states.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        sequence: &Tensor,
        dropout_rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Tensor> {
        let shape = sequence.shape();
        if shape.len() != 2 || shape[1] != self.input_size() || shape[0] == 0 {
            return Err(Error::shape(
                format!("[T >= 1, {}]", self.input_size()),
                format!("{shape:?}"),
            ));
        }
        let dropout = Dropout::new(dropout_rate)?;
        let batched = Tensor::from_vec(&[1, shape[0], shape[1]], sequence.data().to_vec())?;
        let mask = (training && dropout.rate > 0.0)
            .then(|| dropout.sample_mask(self.input_size(), rng));
        let (out, _) = self.forward_batch(&batched, mask)?;
        Tensor::from_vec(&[shape[0], self.hidden_size()], out.into_data())
    }

    /// Runs a `[B, T, i]` batch. `mask`, when given, is a `[B, i]` dropout
    /// mask applied to every step's input.
    pub fn forward_batch(&self, input: &Tensor, mask: Option<Vec<f64>>) -> Result<(Tensor, LstmCache)> {
        let (i, c) = (self.input_size(), self.hidden_size());
        let shape = input.shape();
        if shape.len() != 3 || shape[2] != i || shape[1] == 0 {
            return Err(Error::shape(format!("[batch, T >= 1, {i}]"), format!("{shape:?}")));
        }
        let (batch, steps) = (shape[0], shape[1]);
        if let Some(m) = &mask {
            if m.len() != batch * i {
                return Err(Error::shape(format!("mask of {}", batch * i), m.len()));
            }
        }
        let width = i + c;
        let mut cache = LstmCache {
            batch,
            steps,
            concat: vec![0.0; steps * batch * width],
            gates: vec![0.0; steps * batch * 4 * c],
            cells: vec![0.0; steps * batch * c],
            cells_tanh: vec![0.0; steps * batch * c],
            mask,
        };
        let mut output = Tensor::zeros(&[batch, steps, c]);
        let x = input.data();
        let bias = self.bias.data();

        for t in 0..steps {
            for b in 0..batch {
                let z_off = (t * batch + b) * width;
                let s_off = (t * batch + b) * c;
                let g_off = (t * batch + b) * 4 * c;
                {
                    let z = &mut cache.concat[z_off..z_off + width];
                    let xt = &x[(b * steps + t) * i..(b * steps + t + 1) * i];
                    match &cache.mask {
                        Some(m) => {
                            for ((zj, &xj), &mj) in z[..i].iter_mut().zip(xt).zip(&m[b * i..(b + 1) * i]) {
                                *zj = xj * mj;
                            }
                        }
                        None => z[..i].copy_from_slice(xt),
                    }
                    if t > 0 {
                        let prev = &output.data()[(b * steps + t - 1) * c..(b * steps + t) * c];
                        z[i..].copy_from_slice(prev);
                    }
                }
                let z = &cache.concat[z_off..z_off + width];
                let gates = &mut cache.gates[g_off..g_off + 4 * c];
                for (g, a) in gates.iter_mut().enumerate() {
                    let pre = dot(self.weights.row(g), z) + bias[g];
                    *a = if g / c == GATE_CELL { pre.tanh() } else { sigmoid(pre) };
                }
                for j in 0..c {
                    let ig = gates[GATE_INPUT * c + j];
                    let fg = gates[GATE_FORGET * c + j];
                    let cg = gates[GATE_CELL * c + j];
                    let og = gates[GATE_OUTPUT * c + j];
                    let prev_cell = if t > 0 {
                        cache.cells[((t - 1) * batch + b) * c + j]
                    } else {
                        0.0
                    };
                    let cell = fg * prev_cell + ig * cg;
                    let squashed = cell.tanh();
                    cache.cells[s_off + j] = cell;
                    cache.cells_tanh[s_off + j] = squashed;
                    output.data_mut()[(b * steps + t) * c + j] = og * squashed;
                }
            }
        }
        Ok((output, cache))
    }

    /// Backpropagation through time.
    ///
    /// `d_output` is the `[B, T, c]` loss gradient w.r.t. every hidden
    /// state. Parameter gradients are accumulated into `d_weights` and
    /// `d_bias`; the `[B, T, i]` gradient w.r.t. the layer input is returned.
    pub fn backward(
        &self,
        cache: &LstmCache,
        d_output: &Tensor,
        d_weights: &mut Tensor,
        d_bias: &mut Tensor,
    ) -> Tensor {
        let (i, c) = (self.input_size(), self.hidden_size());
        let (batch, steps) = (cache.batch, cache.steps);
        let width = i + c;
        let mut d_input = Tensor::zeros(&[batch, steps, i]);
        let mut dh_next = vec![0.0; batch * c];
        let mut dc_next = vec![0.0; batch * c];
        let mut d_pre = vec![0.0; 4 * c];
        let mut dz = vec![0.0; width];
        let dy = d_output.data();

        for t in (0..steps).rev() {
            for b in 0..batch {
                let s_off = (t * batch + b) * c;
                let g_off = (t * batch + b) * 4 * c;
                let z_off = (t * batch + b) * width;
                let gates = &cache.gates[g_off..g_off + 4 * c];
                for j in 0..c {
                    let ig = gates[GATE_INPUT * c + j];
                    let fg = gates[GATE_FORGET * c + j];
                    let cg = gates[GATE_CELL * c + j];
                    let og = gates[GATE_OUTPUT * c + j];
                    let tc = cache.cells_tanh[s_off + j];
                    let prev_cell = if t > 0 {
                        cache.cells[((t - 1) * batch + b) * c + j]
                    } else {
                        0.0
                    };
                    let dh = dy[(b * steps + t) * c + j] + dh_next[b * c + j];
                    let d_og = dh * tc;
                    let dc = dc_next[b * c + j] + dh * og * (1.0 - tc * tc);
                    let d_ig = dc * cg;
                    let d_cg = dc * ig;
                    let d_fg = dc * prev_cell;
                    dc_next[b * c + j] = dc * fg;
                    d_pre[GATE_INPUT * c + j] = d_ig * ig * (1.0 - ig);
                    d_pre[GATE_FORGET * c + j] = d_fg * fg * (1.0 - fg);
                    d_pre[GATE_CELL * c + j] = d_cg * (1.0 - cg * cg);
                    d_pre[GATE_OUTPUT * c + j] = d_og * og * (1.0 - og);
                }
                let z = &cache.concat[z_off..z_off + width];
                dz.fill(0.0);
                for (g, &d) in d_pre.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    axpy(d, z, d_weights.row_mut(g));
                    d_bias.data_mut()[g] += d;
                    axpy(d, self.weights.row(g), &mut dz);
                }
                let dx = &mut d_input.data_mut()[(b * steps + t) * i..(b * steps + t + 1) * i];
                match &cache.mask {
                    Some(m) => {
                        for ((dxj, &dzj), &mj) in dx.iter_mut().zip(&dz[..i]).zip(&m[b * i..(b + 1) * i]) {
                            *dxj = dzj * mj;
                        }
                    }
                    None => dx.copy_from_slice(&dz[..i]),
                }
                dh_next[b * c..(b + 1) * c].copy_from_slice(&dz[i..]);
            }
        }
        d_input
    }
}
