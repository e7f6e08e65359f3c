//! Single-layer LSTM with explicit backpropagation through time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Gate weights act on `[input; h_prev]`; gate order is input, forget,
/// cell candidate, output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Activations of one time step, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct LstmStep {
    input: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    c: Vec<f64>,
}

impl LstmParams {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        LstmParams {
            weight: Tensor::uniform(4 * hidden, input_dim + hidden, scale, rng),
            bias: Tensor::zeros(4 * hidden, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        LstmParams {
            weight: self.weight.zeros_like(),
            bias: self.bias.zeros_like(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.weight.rows / 4
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols - self.hidden()
    }

    fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmStep {
        let hd = self.hidden();
        let mut input = Vec::with_capacity(x.len() + hd);
        input.extend_from_slice(x);
        input.extend_from_slice(h_prev);
        let mut gates = self.bias.data.clone();
        self.weight.matvec_add(&input, &mut gates);
        let mut c = vec![0.0; hd];
        let mut tanh_c = vec![0.0; hd];
        let mut h = vec![0.0; hd];
        for k in 0..hd {
            let ig = sigmoid(gates[k]);
            let fg = sigmoid(gates[hd + k]);
            let cg = gates[2 * hd + k].tanh();
            let og = sigmoid(gates[3 * hd + k]);
            gates[k] = ig;
            gates[hd + k] = fg;
            gates[2 * hd + k] = cg;
            gates[3 * hd + k] = og;
            c[k] = fg * c_prev[k] + ig * cg;
            tanh_c[k] = c[k].tanh();
            h[k] = og * tanh_c[k];
        }
        LstmStep {
            input,
            c_prev: c_prev.to_vec(),
            gates,
            tanh_c,
            h,
            c,
        }
    }

    /// Runs the sequence from a zero state.
    pub fn forward<'a, I>(&self, inputs: I) -> Vec<LstmStep>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let hd = self.hidden();
        let mut steps: Vec<LstmStep> = Vec::new();
        let zero = vec![0.0; hd];
        for x in inputs {
            let step = match steps.last() {
                Some(prev) => self.step(x, &prev.h, &prev.c),
                None => self.step(x, &zero, &zero),
            };
            steps.push(step);
        }
        steps
    }

    /// Backpropagates `dh[t]` (gradient of the loss w.r.t. each output)
    /// through the recorded steps. Accumulates parameter gradients into
    /// `grad` and returns the gradient w.r.t. each input vector.
    pub fn backward(&self, steps: &[LstmStep], dh: &[Vec<f64>], grad: &mut LstmParams) -> Vec<Vec<f64>> {
        let hd = self.hidden();
        let dim = self.input_dim();
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        let mut dz = vec![0.0; 4 * hd];
        let mut dinputs = vec![Vec::new(); steps.len()];
        for t in (0..steps.len()).rev() {
            let s = &steps[t];
            for k in 0..hd {
                let dh_k = dh[t][k] + dh_next[k];
                let ig = s.gates[k];
                let fg = s.gates[hd + k];
                let cg = s.gates[2 * hd + k];
                let og = s.gates[3 * hd + k];
                let d_o = dh_k * s.tanh_c[k];
                let dc = dc_next[k] + dh_k * og * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                let d_i = dc * cg;
                let d_g = dc * ig;
                let d_f = dc * s.c_prev[k];
                dc_next[k] = dc * fg;
                dz[k] = d_i * ig * (1.0 - ig);
                dz[hd + k] = d_f * fg * (1.0 - fg);
                dz[2 * hd + k] = d_g * (1.0 - cg * cg);
                dz[3 * hd + k] = d_o * og * (1.0 - og);
            }
            grad.weight.outer_add(&dz, &s.input);
            for (b, &d) in grad.bias.data.iter_mut().zip(&dz) {
                *b += d;
            }
            let mut dinput = vec![0.0; dim + hd];
            self.weight.matvec_t_add(&dz, &mut dinput);
            dh_next.copy_from_slice(&dinput[dim..]);
            dinput.truncate(dim);
            dinputs[t] = dinput;
        }
        dinputs
    }
}
